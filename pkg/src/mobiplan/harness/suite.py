"""Benchmark driver: scenarios x planner variants, metrics, report files.

Cells run sequentially in deterministic (scenario, variant) order; each cell
re-derives its planner seed from the scenario identity and the variant index,
so results are reproducible regardless of which subset of cells is run.
Distance fields are built once per scenario and shared across variants.

Reports: a metrics CSV (one row per cell, parseable back into RunMetrics), a
per-cell trajectory dump (one row per trajectory sample with per-term costs),
and a plain-text aggregate summary. Every float is written with repr so the
CSV is byte-stable; wall-clock latency is the one column excluded from
byte-for-byte comparisons.
"""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .. import kernels
from ..costs import CostContext, CostWeights, ObjectiveReport, \
    reachability_cost
from ..geometry import gamma_to_world
from ..kinematics import forward_kinematics
from ..planner import PlannerConfig, SearchMode, effective_track_start, \
    init_trajectory, lift_waypoint, plan_episode
from ..costs import total_objective
from ..scene import materialize_points, sample_query_points
from .scenarios import BASE_BODY, FAMILIES, Scenario

# budget shared by every variant: bilevel spends it across blocks, direct
# in one annealing run, so the comparison is at equal evaluation counts
SUITE_CONFIG = PlannerConfig(anneal_evals=32, n_up=6, n_low=2,
                             max_outer_rounds=16)


@dataclass(frozen=True)
class Variant:
    """Named planner configuration + cost weights for one suite column."""

    name: str
    config: PlannerConfig = SUITE_CONFIG
    weights: CostWeights = CostWeights()


def default_variants() -> list:
    return [Variant("default")]


def ablation_variants() -> list:
    """Search-space and cost-term comparison set at equal budgets."""
    return [
        Variant("default"),
        Variant("direct", replace(SUITE_CONFIG,
                                  search_mode=SearchMode.DIRECT)),
        Variant("no_reach", SUITE_CONFIG, CostWeights(lambda_r=0.0)),
        Variant("no_smooth", SUITE_CONFIG, CostWeights(lambda_s=0.0)),
        Variant("no_collide", SUITE_CONFIG, CostWeights(lambda_c=0.0)),
    ]


@dataclass(frozen=True)
class RunMetrics:
    """Per-cell outcome mirroring the planner comparison tables."""

    success: bool
    partial_successes: tuple
    steps: int
    latency_ms: float
    objective_breakdown: ObjectiveReport

    def __post_init__(self):
        parts = tuple(bool(p) for p in self.partial_successes)
        object.__setattr__(self, "partial_successes", parts)
        if self.success and not all(parts):
            raise ValueError("success requires every segment to succeed")


@dataclass(frozen=True)
class CellResult:
    scenario: str
    family: str
    variant: str
    metrics: RunMetrics
    seg_pin_start: tuple
    seg_pin_end: tuple
    seg_min_esdf: tuple
    seg_never_worse: tuple
    objective_evals: int
    outer_rounds: int
    trajectory_rows: tuple = ()
    plans: tuple = ()


@dataclass(frozen=True)
class AggregateRow:
    family: str
    variant: str
    count: int
    success_rate: float
    partial_rate: float
    mean_latency_ms: float
    mean_steps: float


@dataclass(frozen=True)
class SuiteTable:
    cells: tuple
    aggregates: tuple


def _cell_seed(scenario_seed: int) -> int:
    # variants share the per-scenario seed: paired draws cut the variance of
    # cross-variant comparisons, and an ablation whose cost term is inactive
    # (no_collide on an obstacle-free scene) reproduces the default run
    ss = np.random.SeedSequence([scenario_seed, 977])
    return int(ss.generate_state(1, np.uint64)[0] & 0x7FFFFFFF)


def _ee_world(chain, state):
    return gamma_to_world(state.base, forward_kinematics(chain, state.joints))


def _trajectory_rows(plan, seg_index, ctx):
    """Per-sample dump rows: pose, joints, gripper, per-term costs."""
    traj = plan.trajectory
    w = ctx.weights
    ik = plan.report.ik_results
    rows = []
    prev = None
    for i, state in enumerate(traj.states):
        pts = materialize_points(ctx.qps, state, ctx.chain)
        d = ctx.field.query_many(pts)
        collide = float(np.sum(np.maximum(0.0, w.epsilon0 - d)))
        if prev is None:
            smooth = 0.0
        else:
            dq = float(np.linalg.norm(state.joints - prev.joints))
            dyaw = kernels.wrap_angle_scalar(state.base.yaw - prev.base.yaw)
            smooth = dq + math.sqrt(
                (state.base.x - prev.base.x) ** 2
                + (state.base.y - prev.base.y) ** 2
                + (w.yaw_weight * dyaw) ** 2)
        rows.append((seg_index, i, state.base.x, state.base.y, state.base.yaw)
                    + tuple(float(v) for v in state.joints)
                    + (state.gripper, reachability_cost(ik[i], w), smooth,
                       collide, float(np.min(d))))
        prev = state
    return rows


def run_cell(scenario: Scenario, variant: Variant, field, *,
             cell_seed: int, n_q: int = 64, qp_seed: int = 0,
             keep_plans: bool = False) -> CellResult:
    """Plan the scenario's episode under one variant and score it."""
    chain = scenario.chain
    qps = sample_query_points(chain, BASE_BODY, n_q=n_q, seed=qp_seed)
    ctx = CostContext(chain, field, qps, variant.weights)
    cfg = replace(variant.config, rng_seed=cell_seed)

    plans = plan_episode(list(scenario.waypoint_script),
                         scenario.start_state, ctx, cfg)

    pin_start, pin_end, min_esdf, never_worse, rows = [], [], [], [], []
    before = scenario.start_state
    for k, (wp, plan) in enumerate(zip(scenario.waypoint_script, plans)):
        lifted_cur, lifted_next = lift_waypoint(wp)
        traj = plan.trajectory
        first = _ee_world(chain, traj.states[0])
        last = _ee_world(chain, traj.states[-1])
        # start pinning is judged against the track the planner actually
        # followed, which recovers from a failed predecessor segment
        track_start = traj.ee_targets[0] if traj.ee_targets else lifted_cur
        pin_start.append(float(np.linalg.norm(
            first.position - track_start.position)))
        pin_end.append(float(np.linalg.norm(
            last.position - lifted_next.position)))
        min_esdf.append(plan.report.min_distance)

        eff = effective_track_start(before, lifted_cur, chain, cfg.mu_s)
        init = init_trajectory(before, eff, lifted_next, cfg, chain=chain)
        init_total = total_objective(init, ctx).total
        never_worse.append(bool(plan.report.total <= init_total + 1e-9))

        rows.extend(_trajectory_rows(plan, k, ctx))
        before = traj.states[-1]

    breakdown = ObjectiveReport(
        reach=sum(p.report.reach for p in plans),
        smooth=sum(p.report.smooth for p in plans),
        collide=sum(p.report.collide for p in plans),
        weights=variant.weights,
        min_distance=min(min_esdf))
    metrics = RunMetrics(
        success=all(p.converged for p in plans),
        partial_successes=tuple(p.converged for p in plans),
        steps=sum(len(p.trajectory) for p in plans),
        latency_ms=float(np.mean([p.wall_time_ms for p in plans])),
        objective_breakdown=breakdown)
    return CellResult(
        scenario=scenario.name, family=scenario.family, variant=variant.name,
        metrics=metrics, seg_pin_start=tuple(pin_start),
        seg_pin_end=tuple(pin_end), seg_min_esdf=tuple(min_esdf),
        seg_never_worse=tuple(never_worse),
        objective_evals=sum(p.objective_evals for p in plans),
        outer_rounds=sum(p.outer_rounds_used for p in plans),
        trajectory_rows=tuple(rows),
        plans=tuple(plans) if keep_plans else ())


def _aggregate(cells: Sequence[CellResult], variants: Sequence[str]) -> tuple:
    rows = []
    families = [f for f in FAMILIES if any(c.family == f for c in cells)]
    for family in families + ["all"]:
        for vname in variants:
            group = [c for c in cells if c.variant == vname
                     and (family == "all" or c.family == family)]
            if not group:
                continue
            parts = [p for c in group for p in c.metrics.partial_successes]
            rows.append(AggregateRow(
                family=family, variant=vname, count=len(group),
                success_rate=float(np.mean(
                    [c.metrics.success for c in group])),
                partial_rate=float(np.mean(parts)),
                mean_latency_ms=float(np.mean(
                    [c.metrics.latency_ms for c in group])),
                mean_steps=float(np.mean(
                    [c.metrics.steps for c in group]))))
    return tuple(rows)


def run_suite(scenarios: Sequence[Scenario], variants: Sequence[Variant],
              *, n_q: int = 64, qp_seed: int = 0,
              progress: Optional[Callable] = None) -> SuiteTable:
    """Full cross-product; per-cell failures are recorded, never raised."""
    if not scenarios or not variants:
        raise ValueError("need at least one scenario and one variant")
    cells = []
    for scenario in scenarios:
        field = scenario.build_distance_field()
        seed = _cell_seed(scenario.rng_seed)
        for variant in variants:
            cell = run_cell(scenario, variant, field, cell_seed=seed,
                            n_q=n_q, qp_seed=qp_seed)
            cells.append(cell)
            if progress is not None:
                progress(cell)
    return SuiteTable(tuple(cells),
                      _aggregate(cells, [v.name for v in variants]))


def success_rate(table: SuiteTable, family: Optional[str] = None,
                 variant: Optional[str] = None) -> float:
    group = [c for c in table.cells
             if (family is None or c.family == family)
             and (variant is None or c.variant == variant)]
    if not group:
        raise ValueError(f"no cells for family={family!r} variant={variant!r}")
    return float(np.mean([c.metrics.success for c in group]))


def mean_latency(table: SuiteTable, variant: str) -> float:
    group = [c for c in table.cells if c.variant == variant]
    if not group:
        raise ValueError(f"no cells for variant {variant!r}")
    return float(np.mean([c.metrics.latency_ms for c in group]))


METRICS_COLUMNS = (
    "scenario", "family", "variant", "success", "partial_successes", "steps",
    "latency_ms", "reach_cost", "smooth_cost", "collision_cost", "total_cost",
    "min_esdf", "lambda_r", "lambda_s", "lambda_c", "seg_pin_start",
    "seg_pin_end", "seg_min_esdf", "seg_never_worse", "objective_evals",
    "outer_rounds")


def _fmt_bool(b: bool) -> str:
    return "true" if b else "false"


def _fmt_bools(bs) -> str:
    return ";".join("1" if b else "0" for b in bs)


def _fmt_floats(fs) -> str:
    return ";".join(repr(float(f)) for f in fs)


def metrics_csv_text(table: SuiteTable) -> str:
    out = io.StringIO()
    out.write(",".join(METRICS_COLUMNS) + "\n")
    for c in table.cells:
        m, b = c.metrics, c.metrics.objective_breakdown
        out.write(",".join((
            c.scenario, c.family, c.variant, _fmt_bool(m.success),
            _fmt_bools(m.partial_successes), str(m.steps),
            repr(m.latency_ms), repr(b.reach), repr(b.smooth),
            repr(b.collide), repr(b.total), repr(b.min_distance),
            repr(b.weights.lambda_r), repr(b.weights.lambda_s),
            repr(b.weights.lambda_c), _fmt_floats(c.seg_pin_start),
            _fmt_floats(c.seg_pin_end), _fmt_floats(c.seg_min_esdf),
            _fmt_bools(c.seg_never_worse), str(c.objective_evals),
            str(c.outer_rounds))) + "\n")
    return out.getvalue()


def strip_latency_column(csv_text: str) -> str:
    """Byte-comparison form: the wall-clock column removed from every row."""
    lines = csv_text.strip("\n").split("\n")
    idx = lines[0].split(",").index("latency_ms")
    out = []
    for line in lines:
        cols = line.split(",")
        del cols[idx]
        out.append(",".join(cols))
    return "\n".join(out) + "\n"


def parse_metrics_csv(path) -> list:
    """Rows as dicts with ``metrics`` holding the reconstructed RunMetrics.

    Weights are rebuilt from the lambda columns; the remaining cost knobs
    take their defaults, matching how suite variants are constructed.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().strip("\n").split("\n")
    except OSError as exc:
        raise RuntimeError(f"reading metrics file {path}: {exc}") from exc
    header = lines[0].split(",")
    if tuple(header) != METRICS_COLUMNS:
        raise ValueError(f"unexpected metrics columns in {path}")
    rows = []
    for line in lines[1:]:
        v = dict(zip(header, line.split(",")))
        weights = CostWeights(lambda_r=float(v["lambda_r"]),
                              lambda_s=float(v["lambda_s"]),
                              lambda_c=float(v["lambda_c"]))
        breakdown = ObjectiveReport(
            reach=float(v["reach_cost"]), smooth=float(v["smooth_cost"]),
            collide=float(v["collision_cost"]), weights=weights,
            min_distance=float(v["min_esdf"]))
        metrics = RunMetrics(
            success=v["success"] == "true",
            partial_successes=tuple(ch == "1"
                                    for ch in v["partial_successes"].split(";")),
            steps=int(v["steps"]), latency_ms=float(v["latency_ms"]),
            objective_breakdown=breakdown)
        rows.append({"scenario": v["scenario"], "family": v["family"],
                     "variant": v["variant"], "metrics": metrics})
    return rows


_TRAJ_HEADER = ("segment", "sample", "base_x", "base_y", "base_yaw",
                "q0", "q1", "q2", "q3", "q4", "q5", "gripper", "reach_cost",
                "step_smooth_cost", "collision_cost", "min_esdf")


def summary_text(table: SuiteTable) -> str:
    out = io.StringIO()
    out.write(f"{'family':<14}{'variant':<12}{'n':>4}{'sr':>8}"
              f"{'partial':>9}{'latency_ms':>12}{'steps':>8}\n")
    for a in table.aggregates:
        out.write(f"{a.family:<14}{a.variant:<12}{a.count:>4}"
                  f"{a.success_rate:>8.3f}{a.partial_rate:>9.3f}"
                  f"{a.mean_latency_ms:>12.1f}{a.mean_steps:>8.1f}\n")
    return out.getvalue()


def _write(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise RuntimeError(f"writing report file {path}: {exc}") from exc


def emit_report(table: SuiteTable, out_dir) -> dict:
    """metrics.csv + summary.txt + trajectories/<scenario>__<variant>.csv."""
    out_dir = os.fspath(out_dir)
    traj_dir = os.path.join(out_dir, "trajectories")
    try:
        os.makedirs(traj_dir, exist_ok=True)
    except OSError as exc:
        raise RuntimeError(f"creating report dir {traj_dir}: {exc}") from exc

    paths = {"metrics": os.path.join(out_dir, "metrics.csv"),
             "summary": os.path.join(out_dir, "summary.txt")}
    _write(paths["metrics"], metrics_csv_text(table))
    _write(paths["summary"], summary_text(table))
    for c in table.cells:
        rows = [",".join(_TRAJ_HEADER)]
        for r in c.trajectory_rows:
            rows.append(",".join([str(r[0]), str(r[1])]
                                 + [repr(float(x)) for x in r[2:]]))
        _write(os.path.join(traj_dir, f"{c.scenario}__{c.variant}.csv"),
               "\n".join(rows) + "\n")
    paths["trajectories"] = traj_dir
    return paths
