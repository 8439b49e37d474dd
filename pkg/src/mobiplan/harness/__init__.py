"""Benchmark harness: scenario generation, suite driver, CLI."""

from .scenarios import (CertificateError, FAMILIES, GenerationError, Scenario,
                        certificate_clearance, generate_scenarios,
                        load_scenarios, save_scenarios, scenario_from_dict,
                        scenario_to_dict, swept_points, validate_certificate)
from .suite import (AggregateRow, CellResult, METRICS_COLUMNS, RunMetrics,
                    SUITE_CONFIG, SuiteTable, Variant, ablation_variants,
                    default_variants, emit_report, mean_latency,
                    metrics_csv_text, parse_metrics_csv, run_cell, run_suite,
                    strip_latency_column, success_rate, summary_text)

__all__ = [
    "AggregateRow", "CellResult", "CertificateError", "FAMILIES",
    "GenerationError", "METRICS_COLUMNS", "RunMetrics", "SUITE_CONFIG",
    "Scenario", "SuiteTable", "Variant", "ablation_variants",
    "certificate_clearance", "default_variants", "emit_report",
    "generate_scenarios", "load_scenarios", "mean_latency",
    "metrics_csv_text", "parse_metrics_csv", "run_cell", "run_suite",
    "save_scenarios", "scenario_from_dict", "scenario_to_dict",
    "strip_latency_column", "success_rate", "summary_text", "swept_points",
    "validate_certificate",
]
