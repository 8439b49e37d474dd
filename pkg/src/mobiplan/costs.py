"""The feasibility objective stack.

Three terms over a trajectory segment:

  reach:   per-state normalized IK iteration count, or a large constant C0
           when the solver exhausts its budget
  smooth:  sum over consecutive states of ||joint delta||_2 + ||base delta||_2
           (base delta stacks x, y and wrapped yaw; meters and radians mix
           unscaled, with an optional yaw weight exposed)
  collide: sum over states and surface query points of max(0, eps0 - D)

The weighted total is lambda_r*reach + lambda_s*smooth + lambda_c*collide.
The upper-level base-placement objective scores one base pose against a set
of sampled end-effector candidates: sum of all candidate objectives plus
alpha times the sum of the k_top best.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .geometry import BasePose, Pose3, gamma_to_world
from .kinematics import (
    DLS_DAMPING,
    DLS_STEP_CAP,
    IK_TOL_POS,
    IK_TOL_ROT,
    IKResult,
    IKStatus,
    KinematicChain,
    forward_kinematics,
)
from .scene import DistanceField, QueryPointSet


@dataclass(frozen=True)
class WholeBodyState:
    """One trajectory sample: base pose, arm joints, gripper openness."""

    base: BasePose
    joints: np.ndarray
    gripper: float = 1.0

    def __post_init__(self):
        joints = np.array(self.joints, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(joints)):
            raise ValueError("non-finite joint angles")
        joints.setflags(write=False)
        g = float(self.gripper)
        if not 0.0 <= g <= 1.0:
            raise ValueError("gripper openness must lie in [0, 1]")
        object.__setattr__(self, "joints", joints)
        object.__setattr__(self, "gripper", g)


@dataclass(frozen=True)
class Trajectory:
    """T+1 whole-body samples between two consecutive waypoints.

    ``ee_targets``, when present, is the nominal world-frame end-effector
    track the samples were solved against (one pose per state); it lets
    evaluation score the intended track even where IK only approximated it.
    Without it the targets are derived from each state's own joints.
    """

    states: Sequence[WholeBodyState]
    ee_targets: Optional[Sequence[Pose3]] = None

    def __post_init__(self):
        states = tuple(self.states)
        if len(states) < 2:
            raise ValueError("trajectory needs at least 2 states")
        n = states[0].joints.shape[0]
        if any(s.joints.shape[0] != n for s in states):
            raise ValueError("inconsistent joint vector lengths")
        object.__setattr__(self, "states", states)
        if self.ee_targets is not None:
            targets = tuple(self.ee_targets)
            if len(targets) != len(states):
                raise ValueError("ee_targets must align with states")
            object.__setattr__(self, "ee_targets", targets)

    def __len__(self) -> int:
        return len(self.states)

    def bases_array(self) -> np.ndarray:
        return np.array([[s.base.x, s.base.y, s.base.yaw]
                         for s in self.states])

    def joints_array(self) -> np.ndarray:
        return np.array([s.joints for s in self.states])


@dataclass(frozen=True)
class CostWeights:
    lambda_r: float = 10.0
    lambda_s: float = 1.0
    lambda_c: float = 0.6
    epsilon0: float = 0.1
    c0: float = 1e3
    n_max: int = 100
    alpha: float = 0.5
    k_top: int = 3
    n_arm_candidates: int = 16
    arm_sigma_pos: float = 0.05
    arm_sigma_rot: float = 0.1
    yaw_weight: float = 1.0

    def __post_init__(self):
        # lambdas may be zeroed for term-removal ablations
        if min(self.lambda_r, self.lambda_s, self.lambda_c) < 0.0:
            raise ValueError("cost weights must be non-negative")
        if not (self.epsilon0 > 0.0 and self.yaw_weight > 0.0):
            raise ValueError("epsilon0 and yaw_weight must be positive")
        if self.c0 < 1e3:
            raise ValueError("c0 must be at least 1e3")
        if self.n_max < 1:
            raise ValueError("n_max must be at least 1")
        if not self.alpha > 0.0:
            raise ValueError("alpha must be positive")
        if not 1 <= self.k_top <= self.n_arm_candidates:
            raise ValueError("need 1 <= k_top <= n_arm_candidates")
        if not (self.arm_sigma_pos > 0.0 and self.arm_sigma_rot > 0.0):
            raise ValueError("candidate sigmas must be positive")


@dataclass(frozen=True)
class CostContext:
    """Everything objective evaluation needs, immutable."""

    chain: KinematicChain
    field: DistanceField
    qps: QueryPointSet
    weights: CostWeights = field(default_factory=CostWeights)

    def segment_args(self) -> tuple:
        """Chain + field + query-point arrays in kernel argument order."""
        return self.chain.packed() + (
            self.field.values, self.field.origin, self.field.inv_resolution,
            self.qps.link_index, self.qps.offsets)

    def solver_args(self) -> tuple:
        w = self.weights
        return (w.n_max, IK_TOL_POS, IK_TOL_ROT, DLS_DAMPING, DLS_STEP_CAP,
                w.epsilon0, w.c0, w.yaw_weight)


@dataclass(frozen=True)
class ObjectiveReport:
    reach: float
    smooth: float
    collide: float
    weights: CostWeights
    ik_results: tuple = ()
    min_distance: float = kernels.FREE_SPACE_DISTANCE

    @property
    def total(self) -> float:
        w = self.weights
        return (w.lambda_r * self.reach + w.lambda_s * self.smooth
                + w.lambda_c * self.collide)

    @property
    def all_reachable(self) -> bool:
        return all(r.converged for r in self.ik_results)


def reachability_cost(ik: IKResult, w: CostWeights) -> float:
    """Normalized iteration count when converged, C0 otherwise."""
    if ik.status is IKStatus.CONVERGED:
        return ik.iterations / w.n_max
    return w.c0


def smoothness_cost(traj: Trajectory, ik_joints: Sequence[np.ndarray],
                    yaw_weight: float = 1.0) -> float:
    """Sum of joint-space and base-pose step lengths along the trajectory."""
    if len(ik_joints) != len(traj):
        raise ValueError("ik_joints must align with trajectory states")
    total = 0.0
    for t in range(len(traj) - 1):
        dq = np.asarray(ik_joints[t + 1]) - np.asarray(ik_joints[t])
        a, b = traj.states[t].base, traj.states[t + 1].base
        dyaw = kernels.wrap_angle_scalar(b.yaw - a.yaw) * yaw_weight
        base_step = math.sqrt((b.x - a.x) ** 2 + (b.y - a.y) ** 2
                              + dyaw * dyaw)
        total += float(np.linalg.norm(dq)) + base_step
    return total


def collision_cost(traj: Trajectory, qps: QueryPointSet,
                   field: DistanceField, w: CostWeights,
                   chain: KinematicChain) -> float:
    """Double sum of hinge penalties max(0, eps0 - D) over states and points."""
    from .scene import materialize_points

    total = 0.0
    for state in traj.states:
        pts = materialize_points(qps, state, chain)
        d = field.query_many(pts)
        total += float(np.sum(np.maximum(0.0, w.epsilon0 - d)))
    return total


@dataclass(frozen=True)
class SegmentEvaluation:
    """Raw kernel evaluation of a (bases, world EE targets) track."""

    reach: float
    smooth: float
    collide: float
    min_distance: float
    joints: np.ndarray  # (S, n) IK solutions
    iterations: np.ndarray  # (S,)
    converged: np.ndarray  # (S,) bool
    residual_pos: np.ndarray  # (S,)
    residual_rot: np.ndarray  # (S,)

    def total(self, w: CostWeights) -> float:
        return (w.lambda_r * self.reach + w.lambda_s * self.smooth
                + w.lambda_c * self.collide)

    def ik_results(self) -> tuple:
        out = []
        for t in range(self.joints.shape[0]):
            status = (IKStatus.CONVERGED if self.converged[t]
                      else IKStatus.ITERATION_BUDGET_EXCEEDED)
            q = self.joints[t].copy()
            q.setflags(write=False)
            out.append(IKResult(status, q, int(self.iterations[t]),
                                (float(self.residual_pos[t]),
                                 float(self.residual_rot[t]))))
        return tuple(out)


def evaluate_targets(bases: np.ndarray, targets_pos: np.ndarray,
                     targets_quat: np.ndarray, seed_joints: np.ndarray,
                     ctx: CostContext) -> SegmentEvaluation:
    """Evaluate a base track against world-frame EE targets.

    IK per state warm-starts from the previous state's solution; state 0
    seeds from ``seed_joints``.
    """
    # fresh writable copies: one compiled kernel signature for all callers
    bases = np.array(bases, dtype=np.float64)
    targets_pos = np.array(targets_pos, dtype=np.float64)
    targets_quat = np.array(targets_quat, dtype=np.float64)
    seed_joints = np.array(seed_joints, dtype=np.float64)
    s_count = bases.shape[0]
    if not (targets_pos.shape == (s_count, 3)
            and targets_quat.shape == (s_count, 4)
            and seed_joints.shape == (ctx.chain.n_joints,)):
        raise ValueError("inconsistent evaluation array shapes")
    reach, smooth, collide, min_dist, joints, iters, flags, res_p, res_r = \
        kernels.eval_segment(*ctx.segment_args(), bases, targets_pos,
                             targets_quat, seed_joints, *ctx.solver_args())
    return SegmentEvaluation(
        reach=float(reach), smooth=float(smooth), collide=float(collide),
        min_distance=float(min_dist), joints=np.asarray(joints),
        iterations=np.asarray(iters),
        converged=np.asarray(flags) == kernels.IK_CONVERGED,
        residual_pos=np.asarray(res_p), residual_rot=np.asarray(res_r))


def _validate_against_chain(traj: Trajectory, chain: KinematicChain) -> None:
    lo, hi = chain.lower_limits, chain.upper_limits
    for state in traj.states:
        q = chain.check_joints(state.joints)
        if np.any(q < lo - 1e-9) or np.any(q > hi + 1e-9):
            raise ValueError("trajectory state violates joint limits")


def total_objective(traj: Trajectory, ctx: CostContext) -> ObjectiveReport:
    """Full objective of a trajectory.

    End-effector targets come from the trajectory's nominal track when it
    carries one, otherwise from FK of each state's joints lifted through its
    base pose. IK re-solves for those targets with warm starts, which is
    what prices reachability.
    """
    _validate_against_chain(traj, ctx.chain)
    s_count = len(traj)
    targets_pos = np.empty((s_count, 3))
    targets_quat = np.empty((s_count, 4))
    if traj.ee_targets is not None:
        for t, pose in enumerate(traj.ee_targets):
            targets_pos[t] = pose.position
            targets_quat[t] = pose.orientation
    else:
        for t, state in enumerate(traj.states):
            ee = gamma_to_world(state.base,
                                forward_kinematics(ctx.chain, state.joints))
            targets_pos[t] = ee.position
            targets_quat[t] = ee.orientation
    ev = evaluate_targets(traj.bases_array(), targets_pos, targets_quat,
                          traj.states[0].joints, ctx)
    return ObjectiveReport(reach=ev.reach, smooth=ev.smooth,
                           collide=ev.collide, weights=ctx.weights,
                           ik_results=ev.ik_results(),
                           min_distance=ev.min_distance)


def topk_weighted_sum(values, alpha: float, k_top: int) -> float:
    """sum(values) + alpha * sum(k_top smallest); index breaks ties."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or values.size == 0:
        raise ValueError("need a nonempty 1-D value array")
    if not 1 <= k_top <= values.size:
        raise ValueError("need 1 <= k_top <= len(values)")
    order = np.argsort(values, kind="stable")
    return float(values.sum() + alpha * values[order[:k_top]].sum())


def sample_arm_candidates(center: Pose3, w: CostWeights,
                          seed: int) -> list:
    """The incumbent EE target plus Gaussian pose perturbations around it."""
    rng = np.random.Generator(np.random.PCG64(seed))
    out = [center]
    for _ in range(w.n_arm_candidates - 1):
        dp = rng.normal(0.0, w.arm_sigma_pos, 3)
        rv = rng.normal(0.0, w.arm_sigma_rot, 3)
        q = kernels.quat_mul(kernels.quat_from_rotvec(rv),
                             np.asarray(center.orientation))
        out.append(Pose3(center.position + dp, q))
    return out


def candidate_objectives(base: BasePose, candidates: Sequence[Pose3],
                         prev_state: WholeBodyState,
                         ctx: CostContext) -> np.ndarray:
    """Single-pose objective O(base, candidate) for each world EE candidate.

    Reachability and collision are evaluated at the candidate pose;
    smoothness is measured against the previous committed state (joint
    delta and base delta). IK seeds from the previous state's joints.
    """
    if len(candidates) == 0:
        raise ValueError("need at least one candidate")
    cand_pos = np.array([c.position for c in candidates])
    cand_quat = np.array([c.orientation for c in candidates])
    w = ctx.weights
    values = kernels.eval_candidates(
        *ctx.segment_args(),
        np.array([base.x, base.y, base.yaw]), cand_pos, cand_quat,
        np.array(prev_state.joints),
        prev_state.base.as_array(),
        *ctx.solver_args(), w.lambda_r, w.lambda_s, w.lambda_c)
    return np.asarray(values)


def upper_objective(base: BasePose, candidates: Sequence[Pose3],
                    prev_state: WholeBodyState, ctx: CostContext,
                    precomputed: Optional[np.ndarray] = None) -> float:
    """Expected-plus-top-k score of a base pose over sampled EE candidates."""
    w = ctx.weights
    values = (precomputed if precomputed is not None
              else candidate_objectives(base, candidates, prev_state, ctx))
    return topk_weighted_sum(values, w.alpha, w.k_top)
