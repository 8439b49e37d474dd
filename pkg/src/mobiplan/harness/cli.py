"""Command-line front end: plan one scenario, run suites, validate files.

Subcommands:
  plan      generate one scenario and plan it with a single variant
  suite     default-variant sweep over scenario families
  ablate    full comparison set (direct search + one-term cost ablations)
  validate  check scenario feasibility certificates, from a file or fresh
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from ..planner import SearchMode
from .scenarios import (CertificateError, FAMILIES, GenerationError,
                        generate_scenarios, load_scenarios, save_scenarios,
                        validate_certificate)
from .suite import (SUITE_CONFIG, Variant, ablation_variants, emit_report,
                    run_suite, summary_text)


def _add_common(p: argparse.ArgumentParser, *, out_required: bool) -> None:
    p.add_argument("--families", default=",".join(FAMILIES),
                   help="comma-separated scenario families")
    p.add_argument("--count", type=int, default=5,
                   help="scenarios per family")
    p.add_argument("--seed", type=int, default=0, help="generation seed")
    p.add_argument("--out", required=out_required, default=None,
                   help="report output directory")
    p.add_argument("--save-scenarios", default=None, metavar="FILE",
                   help="also write the generated scenarios as JSON")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mobiplan",
        description="whole-body base+arm trajectory planning benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="plan a single generated scenario")
    p.add_argument("--family", default="free_space", choices=FAMILIES)
    p.add_argument("--index", type=int, default=0,
                   help="scenario index within the family")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--evals", type=int, default=SUITE_CONFIG.anneal_evals,
                   help="annealing evaluations per block")
    p.add_argument("--mode", default="bilevel", choices=["bilevel", "direct"])

    p = sub.add_parser("suite", help="default-variant benchmark sweep")
    _add_common(p, out_required=True)
    p.add_argument("--evals", type=int, default=SUITE_CONFIG.anneal_evals)
    p.add_argument("--mode", default="bilevel", choices=["bilevel", "direct"])

    p = sub.add_parser("ablate", help="search-mode and cost-term comparison")
    _add_common(p, out_required=True)
    p.add_argument("--evals", type=int, default=SUITE_CONFIG.anneal_evals)

    p = sub.add_parser("validate", help="check feasibility certificates")
    p.add_argument("--file", default=None,
                   help="scenario JSON to validate instead of generating")
    _add_common(p, out_required=False)
    return parser


def _config(args):
    cfg = replace(SUITE_CONFIG, anneal_evals=args.evals)
    if getattr(args, "mode", "bilevel") == "direct":
        cfg = replace(cfg, search_mode=SearchMode.DIRECT)
    return cfg


def _generate(args) -> list:
    scenarios = []
    for fam in args.families.split(","):
        fam = fam.strip()
        if fam not in FAMILIES:
            raise GenerationError(f"unknown family {fam!r}")
        scenarios.extend(generate_scenarios(fam, args.count, seed=args.seed))
    if args.save_scenarios:
        save_scenarios(args.save_scenarios, scenarios)
    return scenarios


def _progress(cell) -> None:
    m = cell.metrics
    tag = "ok" if m.success else "FAIL"
    print(f"  {cell.scenario:<28}{cell.variant:<12}{tag:<6}"
          f"steps={m.steps:<5}latency={m.latency_ms:8.1f}ms", flush=True)


def _run_and_report(scenarios, variants, out_dir) -> int:
    table = run_suite(scenarios, variants, progress=_progress)
    paths = emit_report(table, out_dir)
    print(summary_text(table), end="")
    print(f"report: {paths['metrics']}")
    return 0 if all(c.metrics.success for c in table.cells) else 1


def cmd_plan(args) -> int:
    scenario = generate_scenarios(args.family, args.index + 1,
                                  seed=args.seed)[args.index]
    variant = Variant(args.mode, _config(args))
    return _run_and_report([scenario], [variant], args.out)


def cmd_suite(args) -> int:
    variant = Variant("direct" if args.mode == "direct" else "default",
                      _config(args))
    return _run_and_report(_generate(args), [variant], args.out)


def cmd_ablate(args) -> int:
    variants = [replace(v, config=replace(v.config,
                                          anneal_evals=args.evals))
                for v in ablation_variants()]
    return _run_and_report(_generate(args), variants, args.out)


def cmd_validate(args) -> int:
    if args.file:
        try:
            scenarios = load_scenarios(args.file, validate=False)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
    else:
        scenarios = _generate(args)
    failures = 0
    for sc in scenarios:
        try:
            validate_certificate(sc)
            print(f"  {sc.name:<28}ok")
        except CertificateError as exc:
            failures += 1
            print(f"  {sc.name:<28}FAIL  {exc}")
    print(f"{len(scenarios) - failures}/{len(scenarios)} certificates valid")
    return 1 if failures else 0


_COMMANDS = {"plan": cmd_plan, "suite": cmd_suite, "ablate": cmd_ablate,
             "validate": cmd_validate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (GenerationError, CertificateError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
