"""Scenario generation, serialization, suite metrics, and the CLI."""

import dataclasses
import json

import numpy as np
import pytest

from mobiplan import CostWeights, PlannerConfig, Scene, Sphere
from mobiplan.harness import (
    CertificateError,
    FAMILIES,
    METRICS_COLUMNS,
    RunMetrics,
    Variant,
    certificate_clearance,
    emit_report,
    generate_scenarios,
    load_scenarios,
    mean_latency,
    metrics_csv_text,
    parse_metrics_csv,
    run_suite,
    save_scenarios,
    scenario_from_dict,
    scenario_to_dict,
    strip_latency_column,
    success_rate,
    summary_text,
    swept_points,
    validate_certificate,
)
from mobiplan.harness.cli import main

TINY = PlannerConfig(anneal_evals=16, n_up=1, n_low=1, max_outer_rounds=2)


@pytest.fixture(scope="module")
def tiny_suite():
    scenarios = generate_scenarios("free_space", 2, seed=0)
    variants = [Variant("default", config=TINY),
                Variant("no_collide", config=TINY,
                        weights=CostWeights(lambda_c=0.0))]
    return scenarios, variants, run_suite(scenarios, variants)


def test_family_names():
    assert FAMILIES == ("free_space", "out_of_reach", "corridor",
                        "pick_place")


def test_generation_is_deterministic():
    a = generate_scenarios("free_space", 2, seed=3)
    b = generate_scenarios("free_space", 2, seed=3)
    assert [scenario_to_dict(s) for s in a] == [scenario_to_dict(s)
                                                for s in b]
    assert len({s.name for s in a}) == 2
    assert all(s.family == "free_space" for s in a)


def test_generation_depends_on_seed():
    a = generate_scenarios("free_space", 1, seed=3)[0]
    b = generate_scenarios("free_space", 1, seed=4)[0]
    assert scenario_to_dict(a) != scenario_to_dict(b)


def test_generation_argument_validation():
    with pytest.raises(ValueError):
        generate_scenarios("warehouse", 1, seed=0)
    with pytest.raises(ValueError):
        generate_scenarios("free_space", 0, seed=0)
    with pytest.raises(ValueError):
        generate_scenarios("free_space", 1, seed=-1)


@pytest.mark.parametrize("family", FAMILIES)
def test_every_family_produces_valid_certificates(family):
    scn = generate_scenarios(family, 1, seed=0)[0]
    validate_certificate(scn)
    clear = certificate_clearance(scn)
    if scn.scene.active_obstacles():
        # generation demands the hinge radius plus its own safety margin
        assert clear >= 0.15 - 1e-12
    else:
        assert clear == float("inf")


@pytest.mark.parametrize("family", FAMILIES)
def test_dict_round_trip(family):
    scn = generate_scenarios(family, 1, seed=1)[0]
    doc = scenario_to_dict(scn)
    again = scenario_to_dict(scenario_from_dict(doc))
    assert doc == again


def test_save_load_round_trip(tmp_path):
    scenarios = generate_scenarios("pick_place", 2, seed=2)
    path = tmp_path / "scenarios.json"
    save_scenarios(path, scenarios)
    loaded = load_scenarios(path)
    assert [scenario_to_dict(s) for s in loaded] == \
        [scenario_to_dict(s) for s in scenarios]


def test_load_rejects_schema_mismatch(tmp_path):
    path = tmp_path / "old.json"
    path.write_text(json.dumps({"schema_version": 99, "scenarios": []}))
    with pytest.raises(ValueError, match="schema_version"):
        load_scenarios(path)


def test_file_errors_are_wrapped(tmp_path):
    with pytest.raises(RuntimeError, match="reading scenario file"):
        load_scenarios(tmp_path / "absent.json")
    with pytest.raises(RuntimeError, match="writing scenario file"):
        save_scenarios(tmp_path / "no-such-dir" / "x.json",
                       generate_scenarios("free_space", 1, seed=0))


def test_corrupted_certificate_is_rejected():
    scn = generate_scenarios("free_space", 1, seed=0)[0]
    pts = swept_points(scn)
    hit = pts[pts[:, 2] > 0.15][0]
    blocked = dataclasses.replace(
        scn, scene=Scene((Sphere(hit, 0.05),),
                         scn.scene.workspace_bounds))
    with pytest.raises(CertificateError, match="clearance"):
        validate_certificate(blocked)


def test_swept_points_cover_every_state():
    scn = generate_scenarios("free_space", 1, seed=0)[0]
    pts = swept_points(scn, n_q=32)
    assert pts.shape == (32 * len(scn.certificate), 3)
    assert np.all(np.isfinite(pts))


def test_run_metrics_contract():
    with pytest.raises(ValueError, match="every segment"):
        RunMetrics(success=True, partial_successes=(True, False),
                   steps=10, latency_ms=1.0, objective_breakdown=None)
    m = RunMetrics(success=False, partial_successes=[1, 0],
                   steps=10, latency_ms=1.0, objective_breakdown=None)
    assert m.partial_successes == (True, False)


def test_metrics_columns_are_frozen():
    assert METRICS_COLUMNS == (
        "scenario", "family", "variant", "success", "partial_successes",
        "steps", "latency_ms", "reach_cost", "smooth_cost",
        "collision_cost", "total_cost", "min_esdf", "lambda_r", "lambda_s",
        "lambda_c", "seg_pin_start", "seg_pin_end", "seg_min_esdf",
        "seg_never_worse", "objective_evals", "outer_rounds")


def test_suite_covers_every_pair(tiny_suite):
    scenarios, variants, table = tiny_suite
    got = {(c.scenario, c.variant) for c in table.cells}
    want = {(s.name, v.name) for s in scenarios for v in variants}
    assert got == want
    fam_rows = {(r.family, r.variant): r for r in table.aggregates}
    assert set(fam_rows) == {(f, v.name) for f in ("free_space", "all")
                             for v in variants}
    default_cells = [c for c in table.cells if c.variant == "default"]
    agg = fam_rows[("all", "default")]
    assert agg.count == len(default_cells)
    assert agg.success_rate == pytest.approx(
        np.mean([c.metrics.success for c in default_cells]))
    assert agg.mean_steps == pytest.approx(
        np.mean([c.metrics.steps for c in default_cells]))


def test_rate_and_latency_helpers(tiny_suite):
    _, _, table = tiny_suite
    overall = success_rate(table)
    assert 0.0 <= overall <= 1.0
    scoped = success_rate(table, family="free_space", variant="default")
    cells = [c for c in table.cells if c.variant == "default"]
    assert scoped == pytest.approx(
        np.mean([c.metrics.success for c in cells]))
    assert mean_latency(table, "default") > 0.0


def test_paired_seeds_make_collision_ablation_exact(tiny_suite):
    # obstacle-free scenes: dropping the collision weight must not change
    # anything except wall time, because each variant reuses the same seed
    _, _, table = tiny_suite
    by = {(c.scenario, c.variant): c for c in table.cells}
    for (name, variant), cell in by.items():
        if variant != "default":
            continue
        twin = by[(name, "no_collide")]
        assert twin.metrics.success == cell.metrics.success
        assert twin.metrics.steps == cell.metrics.steps
        assert twin.metrics.partial_successes == \
            cell.metrics.partial_successes
        assert twin.metrics.objective_breakdown.reach == \
            cell.metrics.objective_breakdown.reach
        assert twin.metrics.objective_breakdown.smooth == \
            cell.metrics.objective_breakdown.smooth
        assert twin.metrics.objective_breakdown.collide == 0.0
        assert twin.seg_pin_end == cell.seg_pin_end
        assert twin.seg_min_esdf == cell.seg_min_esdf
        assert twin.objective_evals == cell.objective_evals


def test_metrics_csv_round_trip(tmp_path, tiny_suite):
    _, _, table = tiny_suite
    path = tmp_path / "metrics.csv"
    path.write_text(metrics_csv_text(table))
    rows = parse_metrics_csv(path)
    assert len(rows) == len(table.cells)
    for row, cell in zip(rows, table.cells):
        assert row["scenario"] == cell.scenario
        assert row["family"] == cell.family
        assert row["variant"] == cell.variant
        assert row["metrics"] == cell.metrics


def test_parse_rejects_foreign_header(tmp_path):
    path = tmp_path / "junk.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ValueError, match="columns"):
        parse_metrics_csv(path)
    with pytest.raises(RuntimeError, match="reading metrics file"):
        parse_metrics_csv(tmp_path / "absent.csv")


def test_strip_latency_column(tiny_suite):
    _, _, table = tiny_suite
    text = metrics_csv_text(table)
    stripped = strip_latency_column(text)
    lines = stripped.strip("\n").split("\n")
    header = lines[0].split(",")
    assert "latency_ms" not in header
    assert len(header) == len(METRICS_COLUMNS) - 1
    assert len(lines) == len(table.cells) + 1
    for line in lines[1:]:
        assert len(line.split(",")) == len(header)


def test_summary_text_lists_groups(tiny_suite):
    _, _, table = tiny_suite
    text = summary_text(table)
    for token in ("free_space", "all", "default", "no_collide"):
        assert token in text


def test_emit_report_writes_files(tmp_path, tiny_suite):
    _, _, table = tiny_suite
    paths = emit_report(table, tmp_path / "report")
    assert (tmp_path / "report" / "metrics.csv").exists()
    assert (tmp_path / "report" / "summary.txt").exists()
    parsed = parse_metrics_csv(paths["metrics"])
    assert len(parsed) == len(table.cells)
    traj_files = sorted((tmp_path / "report" / "trajectories").iterdir())
    assert len(traj_files) == len(table.cells)


def test_run_suite_rejects_empty(tiny_suite):
    scenarios, variants, _ = tiny_suite
    with pytest.raises(ValueError):
        run_suite([], variants)
    with pytest.raises(ValueError):
        run_suite(scenarios, [])


def test_cli_validate_generated(capsys):
    rc = main(["validate", "--families", "free_space", "--count", "1",
               "--seed", "0"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "1/1 certificates valid" in out


def test_cli_rejects_unknown_family(capsys):
    rc = main(["validate", "--families", "warehouse", "--count", "1"])
    err = capsys.readouterr().err
    assert rc == 2
    assert "error:" in err


def test_cli_validate_file(tmp_path, capsys):
    path = tmp_path / "scn.json"
    save_scenarios(path, generate_scenarios("free_space", 1, seed=0))
    assert main(["validate", "--file", str(path)]) == 0
    capsys.readouterr()
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema_version": 99, "scenarios": []}))
    assert main(["validate", "--file", str(bad)]) == 2


def test_cli_plan_writes_report(tmp_path, capsys):
    out = tmp_path / "run"
    rc = main(["plan", "--family", "free_space", "--index", "0",
               "--seed", "0", "--evals", "16", "--out", str(out)])
    assert rc == 0
    assert (out / "metrics.csv").exists()
    assert (out / "summary.txt").exists()
    assert any((out / "trajectories").iterdir())


def test_cli_suite_saves_scenarios(tmp_path, capsys):
    out = tmp_path / "run"
    scn_file = tmp_path / "suite-scenarios.json"
    rc = main(["suite", "--families", "free_space", "--count", "1",
               "--seed", "1", "--evals", "16", "--out", str(out),
               "--save-scenarios", str(scn_file)])
    assert rc == 0
    assert (out / "metrics.csv").exists()
    assert len(load_scenarios(scn_file)) == 1
