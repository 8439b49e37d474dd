"""Segment-wise whole-body trajectory search between task waypoints.

A segment connects two consecutive end-effector waypoints. The search keeps
two coupled tracks: a planar base pose per trajectory sample and a world
end-effector target per sample. Joints come from IK against the targets,
warm-started along the trajectory. Two modes:

  bilevel: alternating blocks. An upper block anneals one sample's base
           pose (3-D) scored against arm-target candidates sampled around
           the incumbent target; a lower block anneals one sample's
           end-effector target (6-D, position + rotation vector) scored by
           the full segment objective. Block cursors sweep the samples
           cyclically, and the alternation repeats up to max_outer_rounds
           or until the final end-effector lands within mu_s of the goal.
  direct:  one annealing run over all free samples jointly, 10 dims per
           sample (base x/y/yaw, target position delta, target rotation
           delta, gripper), same objective, total budget equal to what the
           bilevel mode may spend.

Sample 0 is pinned to the start state entirely; the final sample's target
stays pinned to the lifted goal waypoint while its base remains free. The
returned trajectory is the best full-objective snapshot seen, so it is never
worse than the interpolation initialization.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .annealing import AnnealConfig, SearchSpace, minimize
from .costs import (
    CostContext,
    ObjectiveReport,
    SegmentEvaluation,
    Trajectory,
    WholeBodyState,
    evaluate_targets,
    topk_weighted_sum,
)
from .geometry import BasePose, Pose3, gamma_to_world, interpolate_pose, \
    pose_delta
from .kinematics import KinematicChain, forward_kinematics


class SearchMode(enum.Enum):
    BILEVEL = "bilevel"
    DIRECT = "direct"


@dataclass(frozen=True)
class WaypointPair:
    """Consecutive end-effector waypoints, expressed in the base frame that
    was current when they were produced.

    ``base_at_prediction`` anchors both poses; ``lift_waypoint`` moves them
    into the world frame. ``gripper_next`` is the openness commanded at the
    segment boundary.
    """

    q_current: Pose3
    base_at_prediction: BasePose
    q_next: Pose3
    gripper_next: float = 1.0

    def __post_init__(self):
        g = float(self.gripper_next)
        if not 0.0 <= g <= 1.0:
            raise ValueError("gripper_next must lie in [0, 1]")
        object.__setattr__(self, "gripper_next", g)


@dataclass(frozen=True)
class PlannerConfig:
    """Search knobs shared by both modes.

    ``step_size`` fixes the sample spacing of the initial interpolation
    (meters for translation, radians for rotation); ``mu_s`` is the position
    tolerance that terminates the search. Base and end-effector boxes are
    half-widths around the incumbent values. ``anneal_evals`` is the
    objective budget of one annealing block; the direct mode receives
    anneal_evals * (n_up + n_low) * max_outer_rounds so both modes command
    the same total budget.
    """

    step_size: float = 0.05
    mu_s: float = 0.01
    n_up: int = 5
    n_low: int = 5
    max_outer_rounds: int = 20
    search_mode: SearchMode = SearchMode.BILEVEL
    base_xy_halfwidth: float = 1.0
    base_yaw_halfwidth: float = math.pi
    ee_pos_halfwidth: float = 0.15
    ee_rot_halfwidth: float = 0.3
    anneal_evals: int = 64
    rng_seed: int = 0

    def __post_init__(self):
        if not self.step_size > 0.0:
            raise ValueError("step_size must be positive")
        if not self.mu_s > 0.0:
            raise ValueError("mu_s must be positive")
        if min(self.n_up, self.n_low, self.max_outer_rounds) < 1:
            raise ValueError("block and round counts must be >= 1")
        if not isinstance(self.search_mode, SearchMode):
            raise ValueError("search_mode must be a SearchMode")
        if min(self.base_xy_halfwidth, self.base_yaw_halfwidth,
               self.ee_pos_halfwidth, self.ee_rot_halfwidth) <= 0.0:
            raise ValueError("search box half-widths must be positive")
        if self.anneal_evals < 16:
            raise ValueError("anneal_evals must be at least 16")


@dataclass(frozen=True)
class PlanResult:
    trajectory: Trajectory
    report: ObjectiveReport
    converged: bool
    outer_rounds_used: int
    wall_time_ms: float
    objective_evals: int


def lift_waypoint(wp: WaypointPair) -> tuple:
    """Both waypoints moved into the world frame through the anchor base."""
    return (gamma_to_world(wp.base_at_prediction, wp.q_current),
            gamma_to_world(wp.base_at_prediction, wp.q_next))


def interpolation_steps(a: Pose3, b: Pose3, step_size: float) -> int:
    """Sample count so neither translation nor rotation exceeds step_size."""
    dp, dr = pose_delta(a, b)
    # the -1e-9 guard keeps exact multiples from rounding up
    return max(int(math.ceil(dp / step_size - 1e-9)),
               int(math.ceil(dr / step_size - 1e-9)), 1)


def effective_track_start(start: WholeBodyState, pose_start: Pose3,
                          chain: KinematicChain, mu_s: float) -> Pose3:
    """Where the segment's end-effector track should begin.

    The nominal waypoint when the start state is close enough to it (ten
    tolerances), otherwise the start state's actual end-effector pose, so a
    segment after an upstream failure plans from where the arm really is.
    """
    actual = gamma_to_world(start.base, forward_kinematics(chain,
                                                           start.joints))
    dp, _ = pose_delta(actual, pose_start)
    return pose_start if dp <= 10.0 * mu_s else actual


def init_trajectory(start: WholeBodyState, pose_start: Pose3,
                    pose_end: Pose3, cfg: PlannerConfig,
                    chain: Optional[KinematicChain] = None) -> Trajectory:
    """Interpolation initialization: a stationary base under an end-effector
    track that blends positions linearly and orientations by slerp.

    The returned trajectory carries the track in ``ee_targets``; its states
    repeat the start joints as IK seeds. When ``chain`` is given, the start
    state's actual end-effector pose must lie within 10 * mu_s of
    ``pose_start``.
    """
    if chain is not None:
        actual = gamma_to_world(start.base,
                                forward_kinematics(chain, start.joints))
        dp, _ = pose_delta(actual, pose_start)
        if dp > 10.0 * cfg.mu_s:
            raise ValueError("start end-effector pose is inconsistent with "
                             "the segment's first waypoint")
    steps = interpolation_steps(pose_start, pose_end, cfg.step_size)
    track = [interpolate_pose(pose_start, pose_end, t / steps)
             for t in range(steps + 1)]
    states = [WholeBodyState(start.base, start.joints, start.gripper)
              for _ in track]
    return Trajectory(states, ee_targets=track)


def _derive_seed(*parts) -> int:
    """Deterministic 64-bit seed from a tuple of integer-like parts."""
    entropy = [int(p) & 0xFFFFFFFFFFFFFFFF for p in parts]
    return int(np.random.SeedSequence(entropy).generate_state(
        1, np.uint64)[0])


class _SegmentSearch:
    """Mutable search state for one segment: incumbent base and target
    tracks, the latest full evaluation, and the best snapshot by total."""

    def __init__(self, ctx: CostContext, cfg: PlannerConfig,
                 start: WholeBodyState, track: Sequence[Pose3]):
        self.ctx = ctx
        self.cfg = cfg
        self.tpos = np.array([p.position for p in track])
        self.tquat = np.array([p.orientation for p in track])
        self.bases = np.tile(start.base.as_array(), (len(track), 1))
        self.grips = np.full(len(track), start.gripper)
        self.seed0 = np.array(start.joints)
        self.evals = 0
        self.current = self._evaluate()
        self.best_total = self.current.total(ctx.weights)
        self._snapshot(self.current)

    def _evaluate(self) -> SegmentEvaluation:
        self.evals += 1
        return evaluate_targets(self.bases, self.tpos, self.tquat,
                                self.seed0, self.ctx)

    def _snapshot(self, ev: SegmentEvaluation) -> None:
        self.best = (self.bases.copy(), self.tpos.copy(), self.tquat.copy(),
                     self.grips.copy(), ev)

    def _checkpoint(self) -> None:
        """Full evaluation of the incumbent; keep it when strictly better."""
        ev = self._evaluate()
        self.current = ev
        total = ev.total(self.ctx.weights)
        if total < self.best_total - 1e-12:
            self.best_total = total
            self._snapshot(ev)

    def _block_budget(self, dim: int) -> int:
        # reserve bookkeeping evaluations (init, checkpoints, final pass)
        # so a segment never exceeds anneal_evals per block overall
        return max(dim, self.cfg.anneal_evals - 4)

    def upper_block(self, t: int, block_seed: int) -> None:
        """Anneal sample t's base pose against arm-target candidates."""
        cfg, ctx = self.cfg, self.ctx
        w = ctx.weights
        center = self.bases[t].copy()
        half = np.array([cfg.base_xy_halfwidth, cfg.base_xy_halfwidth,
                         cfg.base_yaw_halfwidth])
        space = SearchSpace(center - half, center + half)
        prev_joints = np.ascontiguousarray(self.current.joints[t - 1])
        prev_base = self.bases[t - 1].copy()
        cpos = self.tpos[t].copy()
        cquat = self.tquat[t].copy()
        seg_args = ctx.segment_args()
        sol_args = ctx.solver_args()
        m = w.n_arm_candidates

        def objective(xb):
            # candidate set is re-drawn per annealing point, seeded from
            # the point's own bits so the score is a pure function of xb
            bits = np.frombuffer(
                np.ascontiguousarray(xb, dtype=np.float64).tobytes(),
                dtype=np.uint64)
            rng = np.random.Generator(np.random.PCG64(
                _derive_seed(block_seed, *bits)))
            cand_pos = np.empty((m, 3))
            cand_quat = np.empty((m, 4))
            cand_pos[0] = cpos
            cand_quat[0] = cquat
            for i in range(1, m):
                cand_pos[i] = cpos + rng.normal(0.0, w.arm_sigma_pos, 3)
                rv = rng.normal(0.0, w.arm_sigma_rot, 3)
                cand_quat[i] = kernels.quat_mul(kernels.quat_from_rotvec(rv),
                                                cquat)
            base_arr = np.array([xb[0], xb[1],
                                 kernels.wrap_angle_scalar(xb[2])])
            self.evals += 1
            values = kernels.eval_candidates(
                *seg_args, base_arr, cand_pos, cand_quat, prev_joints,
                prev_base, *sol_args, w.lambda_r, w.lambda_s, w.lambda_c)
            return topk_weighted_sum(np.asarray(values), w.alpha, w.k_top)

        res = minimize(objective, space,
                       AnnealConfig(max_evals=self._block_budget(3),
                                    rng_seed=block_seed))
        self.bases[t] = (res.x_best[0], res.x_best[1],
                         kernels.wrap_angle_scalar(res.x_best[2]))
        self._checkpoint()

    def lower_block(self, t: int, block_seed: int) -> None:
        """Anneal sample t's end-effector target with every base fixed."""
        cfg, ctx = self.cfg, self.ctx
        w = ctx.weights
        center_pos = self.tpos[t].copy()
        center_quat = self.tquat[t].copy()
        half = np.array([cfg.ee_pos_halfwidth] * 3
                        + [cfg.ee_rot_halfwidth] * 3)
        space = SearchSpace(-half, half)
        work_pos = self.tpos.copy()
        work_quat = self.tquat.copy()

        def decode(x) -> Pose3:
            rv = np.ascontiguousarray(x[3:6])
            return Pose3(center_pos + x[:3],
                         kernels.quat_mul(kernels.quat_from_rotvec(rv),
                                          center_quat))

        def objective(x):
            pose = decode(x)
            work_pos[t] = pose.position
            work_quat[t] = pose.orientation
            self.evals += 1
            ev = evaluate_targets(self.bases, work_pos, work_quat,
                                  self.seed0, ctx)
            return ev.total(w)

        res = minimize(objective, space,
                       AnnealConfig(max_evals=self._block_budget(6),
                                    rng_seed=block_seed))
        pose = decode(res.x_best)
        self.tpos[t] = pose.position
        self.tquat[t] = pose.orientation
        self._checkpoint()

    def run_bilevel(self) -> int:
        cfg = self.cfg
        t_final = self.tpos.shape[0] - 1
        up_cursor = 1
        low_cursor = 1
        rounds = 0
        for rnd in range(cfg.max_outer_rounds):
            for k in range(cfg.n_up):
                self.upper_block(up_cursor,
                                 _derive_seed(cfg.rng_seed, 1, rnd, k,
                                              up_cursor))
                up_cursor = up_cursor + 1 if up_cursor < t_final else 1
            if t_final > 1:
                # interior targets only: both endpoint targets are pinned
                for k in range(cfg.n_low):
                    self.lower_block(low_cursor,
                                     _derive_seed(cfg.rng_seed, 2, rnd, k,
                                                  low_cursor))
                    low_cursor = low_cursor + 1 if low_cursor < t_final - 1 \
                        else 1
            rounds = rnd + 1
            if self.convergence(self.best[4]):
                break
        return rounds

    def run_direct(self, budget: int, seed: int) -> None:
        """Joint annealing over every free sample at once."""
        cfg, ctx = self.cfg, self.ctx
        w = ctx.weights
        s_count = self.tpos.shape[0]
        t_final = s_count - 1
        dims = 10 * t_final
        if budget - 4 < dims:
            raise ValueError("direct-mode budget smaller than its search "
                             "dimension; raise anneal_evals or shorten the "
                             "segment")
        init_bases = self.bases.copy()
        init_tpos = self.tpos.copy()
        init_tquat = self.tquat.copy()
        half = np.array([cfg.base_xy_halfwidth, cfg.base_xy_halfwidth,
                         cfg.base_yaw_halfwidth])
        lo = np.empty(dims)
        hi = np.empty(dims)
        for s in range(1, s_count):
            i = 10 * (s - 1)
            lo[i:i + 3] = init_bases[s] - half
            hi[i:i + 3] = init_bases[s] + half
            lo[i + 3:i + 6] = -cfg.ee_pos_halfwidth
            hi[i + 3:i + 6] = cfg.ee_pos_halfwidth
            lo[i + 6:i + 9] = -cfg.ee_rot_halfwidth
            hi[i + 6:i + 9] = cfg.ee_rot_halfwidth
            lo[i + 9] = 0.0
            hi[i + 9] = 1.0
        # the box midpoint decodes to the initialization except the gripper
        # dimensions, which the objective ignores
        space = SearchSpace(lo, hi)

        def decode_into(x, bases, tpos, tquat, grips):
            for s in range(1, s_count):
                i = 10 * (s - 1)
                bases[s] = (x[i], x[i + 1],
                            kernels.wrap_angle_scalar(x[i + 2]))
                if s < t_final:
                    rv = np.ascontiguousarray(x[i + 6:i + 9])
                    pose = Pose3(init_tpos[s] + x[i + 3:i + 6],
                                 kernels.quat_mul(kernels.quat_from_rotvec(rv),
                                                  init_tquat[s]))
                    tpos[s] = pose.position
                    tquat[s] = pose.orientation
                grips[s] = x[i + 9]

        work_bases = self.bases.copy()
        work_tpos = self.tpos.copy()
        work_tquat = self.tquat.copy()
        work_grips = self.grips.copy()

        def objective(x):
            decode_into(x, work_bases, work_tpos, work_tquat, work_grips)
            self.evals += 1
            ev = evaluate_targets(work_bases, work_tpos, work_tquat,
                                  self.seed0, ctx)
            return ev.total(w)

        res = minimize(objective, space,
                       AnnealConfig(max_evals=budget - 4, rng_seed=seed))
        decode_into(res.x_best, self.bases, self.tpos, self.tquat,
                    self.grips)
        self._checkpoint()

    def convergence(self, ev: SegmentEvaluation) -> bool:
        """Final target pinned to the goal, so its IK position residual is
        the goal distance; demand full-track IK convergence and clearance."""
        return (float(ev.residual_pos[-1]) <= self.cfg.mu_s
                and bool(ev.converged.all())
                and ev.min_distance >= 0.0)

    def materialize(self, gripper_next: float) -> tuple:
        """Rebuild the best snapshot as an immutable trajectory.

        The final evaluation re-seeds sample 0 from its own solution so the
        result is a fixed point: re-evaluating the returned trajectory
        reproduces the report bit for bit.
        """
        bases, tpos, tquat, grips, ev = self.best
        track = [Pose3(tpos[t], tquat[t]) for t in range(tpos.shape[0])]
        pos = np.array([p.position for p in track])
        quat = np.array([p.orientation for p in track])
        seed = ev.joints[0]
        for _ in range(2):
            self.evals += 1
            final = evaluate_targets(bases, pos, quat, seed, self.ctx)
            if np.array_equal(final.joints[0], seed):
                break
            seed = final.joints[0]
        grips = grips.copy()
        grips[-1] = gripper_next
        states = [WholeBodyState(BasePose(*bases[t]), final.joints[t],
                                 grips[t])
                  for t in range(len(track))]
        traj = Trajectory(states, ee_targets=track)
        report = ObjectiveReport(reach=final.reach, smooth=final.smooth,
                                 collide=final.collide,
                                 weights=self.ctx.weights,
                                 ik_results=final.ik_results(),
                                 min_distance=final.min_distance)
        return traj, report, final


def plan_segment(start: WholeBodyState, wp: WaypointPair, ctx: CostContext,
                 cfg: PlannerConfig) -> PlanResult:
    """Plan one segment from the start state to the pair's next waypoint."""
    t0 = time.perf_counter()
    pose_cur, pose_next = lift_waypoint(wp)
    pose_eff = effective_track_start(start, pose_cur, ctx.chain, cfg.mu_s)
    init = init_trajectory(start, pose_eff, pose_next, cfg, chain=ctx.chain)
    search = _SegmentSearch(ctx, cfg, start, init.ee_targets)
    if cfg.search_mode is SearchMode.DIRECT:
        budget = cfg.anneal_evals * (cfg.n_up + cfg.n_low) \
            * cfg.max_outer_rounds
        search.run_direct(budget, _derive_seed(cfg.rng_seed, 3))
        rounds = 1
    else:
        rounds = search.run_bilevel()
    traj, report, final = search.materialize(wp.gripper_next)
    return PlanResult(trajectory=traj, report=report,
                      converged=search.convergence(final),
                      outer_rounds_used=rounds,
                      wall_time_ms=(time.perf_counter() - t0) * 1e3,
                      objective_evals=search.evals)


def plan_episode(waypoints: Sequence[WaypointPair], start: WholeBodyState,
                 ctx: CostContext, cfg: PlannerConfig) -> list:
    """Plan consecutive segments, each starting from the previous final
    state. A failed segment does not stop the episode; later segments plan
    from wherever the failed one ended."""
    if len(waypoints) == 0:
        raise ValueError("need at least one waypoint pair")
    results = []
    state = start
    for wp in waypoints:
        result = plan_segment(state, wp, ctx, cfg)
        results.append(result)
        state = result.trajectory.states[-1]
    return results
