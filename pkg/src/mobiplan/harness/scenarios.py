"""Randomized benchmark scenarios with embedded feasibility certificates.

Four families, all desk scale, all built inversely: goal joint configurations
(and final base poses where the base must move) are sampled first, targets are
their forward kinematics, so every instance is solvable by construction. A
certificate trajectory reaching the goal is recorded before any obstacle is
placed, and obstacle placement is validated against the certificate's swept
collision points, so planner failures on these instances are search failures,
not impossible tasks.

  free_space    no obstacles, goal within arm reach, base may stay put
  out_of_reach  no obstacles, goal beyond arm reach, base must translate
  corridor      two walls with a gap; the base must pass through the gap
  pick_place    tabletop object; pre-grasp, grasp, and place segments

Scenarios serialize to a versioned JSON document; loading validates each
certificate (zero collision cost, all IK converged) before returning it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .. import kernels
from ..costs import CostContext, CostWeights, Trajectory, WholeBodyState, \
    total_objective
from ..geometry import BasePose, Pose3, gamma_to_base, gamma_to_world, \
    pose_delta, wrap_angle
from ..kinematics import KinematicChain, Link, default_chain, \
    forward_kinematics, solve_ik
from ..planner import WaypointPair
from ..scene import AxisBox, Cylinder, DistanceField, Scene, Sphere, \
    batch_distance, build_field, empty_field, sample_query_points

SCHEMA_VERSION = 1
FAMILIES = ("free_space", "out_of_reach", "corridor", "pick_place")

# footprint of the mobile base used for collision checking everywhere
BASE_BODY = AxisBox(np.array([-0.25, -0.20, 0.0]), np.array([0.25, 0.20, 0.25]))

# neutral arm start: end effector near (0.68, 0, 0.47), all joints above z=0.2
HOME_JOINTS = np.array([0.0, 0.2, -1.0, 0.0, 0.8, 0.0])
# compact fold for driving through narrow gaps (lateral extent ~0.27 m);
# keeps the elbow on the same side as the home pose so warm-started IK can
# track a straight joint-space fold without a branch change
TUCK_JOINTS = np.array([0.0, 0.9, -2.3, 0.0, 1.4, 0.0])
# tabletop start: elbow pulled back (x~0.24) and wrist high (z~0.54) so the
# whole arm clears a table slab whose front edge sits at x = 0.45
TABLE_START_JOINTS = np.array([0.0, -0.8, 0.9, 0.0, 0.6, 0.0])

_EPS0 = CostWeights().epsilon0
# extra clearance demanded of certificates beyond the cost hinge radius,
# covering the gap between validation samples and runtime query points
GEN_MARGIN = 0.05
MAX_ATTEMPTS = 40

_FAMILY_TAG = {name: 101 + i for i, name in enumerate(FAMILIES)}


class GenerationError(RuntimeError):
    """No feasible instance found within the attempt budget."""


class CertificateError(ValueError):
    """A scenario's feasibility certificate failed validation."""


class _Retry(Exception):
    """Internal: abandon the current attempt and resample."""


@dataclass(frozen=True)
class Scenario:
    """One benchmark instance: scene, robot, start state, waypoint script.

    ``certificate`` is a known-feasible trajectory from the start state to
    the final goal; generated scenarios always carry one. ``rng_seed`` is
    the instance's stable identity used to derive per-run planner seeds.
    """

    name: str
    family: str
    scene: Scene
    chain: KinematicChain
    start_state: WholeBodyState
    waypoint_script: Sequence[WaypointPair]
    rng_seed: int
    certificate: Optional[Trajectory] = None
    field_resolution: float = 0.04

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        script = tuple(self.waypoint_script)
        if not script:
            raise ValueError("waypoint script must be nonempty")
        for prev, cur in zip(script, script[1:]):
            if not (np.array_equal(prev.q_next.position, cur.q_current.position)
                    and np.array_equal(prev.q_next.orientation,
                                       cur.q_current.orientation)):
                raise ValueError("waypoint script breaks pose chaining")
        object.__setattr__(self, "waypoint_script", script)
        if not self.field_resolution > 0.0:
            raise ValueError("field_resolution must be positive")

    def build_distance_field(self) -> DistanceField:
        """Grid for planning runs; trivial constant field when obstacle-free."""
        if self.scene.active_obstacles():
            return build_field(self.scene, self.field_resolution)
        return empty_field(self.scene)


def _rng(family: str, seed: int, index: int, attempt: int) -> np.random.Generator:
    ss = np.random.SeedSequence(
        [_FAMILY_TAG[family], seed & 0xFFFFFFFF, index, attempt])
    return np.random.Generator(np.random.PCG64(ss))


def _scenario_seed(family: str, seed: int, index: int) -> int:
    ss = np.random.SeedSequence([_FAMILY_TAG[family], seed & 0xFFFFFFFF, index])
    return int(ss.generate_state(1, np.uint64)[0] & 0x7FFFFFFF)


def _uniform(rng, lo: float, hi: float) -> float:
    return float(lo + (hi - lo) * rng.random())


def _random_joints_near(chain: KinematicChain, rng, q_ref: np.ndarray,
                        scale: np.ndarray, radial, z_range,
                        fwd_x: float = -10.0, abs_y: float = 10.0,
                        tries: int = 300):
    """Bounded random joint deltas off ``q_ref`` landing in the envelope.

    Sampling near a reference keeps goal orientations within a modest
    rotation of the start flange, which bounds segment lengths.
    """
    lo, hi = chain.lower_limits, chain.upper_limits
    for _ in range(tries):
        q = np.clip(q_ref + scale * rng.uniform(-1.0, 1.0, chain.n_joints),
                    lo + 0.05, hi - 0.05)
        ee = forward_kinematics(chain, q)
        x, y, zz = ee.position
        r = math.hypot(x, y)
        if (radial[0] <= r <= radial[1] and z_range[0] <= zz <= z_range[1]
                and x >= fwd_x and abs(y) <= abs_y):
            return q, ee
    raise _Retry


_GOAL_SCALE = np.array([0.9, 0.5, 0.8, 0.4, 0.4, 0.4])


def _jittered_home(rng) -> np.ndarray:
    return HOME_JOINTS + rng.uniform(-0.12, 0.12, HOME_JOINTS.shape[0])


def _lerp_states(b0: BasePose, b1: BasePose, q0: np.ndarray, q1: np.ndarray,
                 count: int, gripper: float) -> list:
    """``count`` states walking from just after (b0, q0) up to (b1, q1)."""
    dyaw = wrap_angle(b1.yaw - b0.yaw)
    out = []
    for k in range(1, count + 1):
        s = k / count
        base = BasePose(b0.x + s * (b1.x - b0.x), b0.y + s * (b1.y - b0.y),
                        wrap_angle(b0.yaw + s * dyaw))
        out.append(WholeBodyState(base, q0 + s * (q1 - q0), gripper))
    return out


def _phase_count(prev: WholeBodyState, base_to: BasePose, q_to: np.ndarray,
                 minimum: int) -> int:
    # fine enough that warm-started IK tracks the lerp without branch jumps
    dq = float(np.max(np.abs(q_to - prev.joints)))
    dxy = math.hypot(base_to.x - prev.base.x, base_to.y - prev.base.y)
    dyaw = abs(wrap_angle(base_to.yaw - prev.base.yaw))
    return max(minimum, int(math.ceil(dq / 0.12)),
               int(math.ceil(dxy / 0.08)), int(math.ceil(dyaw / 0.15)))


def _phase_certificate(start: WholeBodyState, phases) -> Trajectory:
    """Concatenate (base_to, q_to, min_count) legs into one trajectory."""
    states = [start]
    for base_to, q_to, minimum in phases:
        prev = states[-1]
        count = _phase_count(prev, base_to, q_to, minimum)
        states.extend(_lerp_states(prev.base, base_to, prev.joints, q_to,
                                   count, prev.gripper))
    return Trajectory(states)


def _mount_world(chain: KinematicChain, base: BasePose) -> np.ndarray:
    from ..geometry import lift_to_pose3
    return lift_to_pose3(base).transform_point(chain.base_mount.position)


def swept_points(scenario: Scenario, n_q: int = 256, seed: int = 1) -> np.ndarray:
    """Collision sample points of every certificate state, world frame."""
    from ..scene import materialize_points
    if scenario.certificate is None:
        raise CertificateError(f"{scenario.name}: no certificate to sweep")
    qps = sample_query_points(scenario.chain, BASE_BODY, n_q=n_q, seed=seed)
    pts = [materialize_points(qps, st, scenario.chain)
           for st in scenario.certificate.states]
    return np.vstack(pts)


def certificate_clearance(scenario: Scenario, n_q: int = 256,
                          seed: int = 1) -> float:
    """Min analytic obstacle distance over the certificate's swept points."""
    pts = swept_points(scenario, n_q=n_q, seed=seed)
    if not scenario.scene.active_obstacles():
        return float("inf")
    return float(np.min(batch_distance(scenario.scene, pts)))


def validate_certificate(scenario: Scenario, margin: float = 0.0) -> None:
    """Certificate contract: zero collision cost and every state IK-solvable.

    Collision is checked against analytic distances (hinge radius eps0 plus
    ``margin``); reachability by re-solving IK along the trajectory with an
    all-free field. Raises CertificateError naming the failed check.
    """
    if scenario.certificate is None:
        raise CertificateError(f"{scenario.name}: certificate missing")
    clear = certificate_clearance(scenario)
    if clear < _EPS0 + margin - 1e-12:
        raise CertificateError(
            f"{scenario.name}: certificate clearance {clear:.4f} below "
            f"{_EPS0 + margin:.4f}")
    qps = sample_query_points(scenario.chain, BASE_BODY, n_q=64, seed=0)
    ctx = CostContext(scenario.chain, empty_field(scenario.scene), qps)
    report = total_objective(scenario.certificate, ctx)
    if not report.all_reachable:
        bad = [i for i, r in enumerate(report.ik_results) if not r.converged]
        raise CertificateError(
            f"{scenario.name}: certificate IK failed at states {bad}")


def _first_waypoint_current(chain: KinematicChain, start: WholeBodyState) -> Pose3:
    # waypoints are expressed in the start base frame, where the current
    # end-effector pose is plain forward kinematics
    return forward_kinematics(chain, start.joints)


def _build_free_space(rng, chain: KinematicChain):
    q_start = _jittered_home(rng)
    start = WholeBodyState(BasePose(0.0, 0.0, 0.0), q_start, 1.0)
    ee0 = forward_kinematics(chain, q_start)
    for _ in range(60):
        q_goal, ee_goal = _random_joints_near(chain, rng, q_start, _GOAL_SCALE,
                                              (0.35, 0.70), (0.20, 0.62))
        dp, dr = pose_delta(ee0, ee_goal)
        if 0.15 <= dp <= 0.55 and dr <= 0.6:
            break
    else:
        raise _Retry
    scene = Scene((), AxisBox(np.array([-1.0, -1.0, -0.1]),
                              np.array([1.4, 1.0, 1.3])))
    script = (WaypointPair(ee0, start.base, ee_goal, 1.0),)
    count = max(int(math.ceil(dp / 0.05)) + 1, 5)
    cert = _phase_certificate(start, [(start.base, q_goal, count)])
    return scene, start, script, cert, 0.05


def _build_out_of_reach(rng, chain: KinematicChain):
    q_start = _jittered_home(rng)
    start = WholeBodyState(BasePose(0.0, 0.0, 0.0), q_start, 1.0)
    ee0 = forward_kinematics(chain, q_start)
    mount0 = _mount_world(chain, start.base)
    for _ in range(60):
        r = _uniform(rng, 0.80, 1.05)
        theta = _uniform(rng, -0.5, 0.5)
        b_final = BasePose(r * math.cos(theta), r * math.sin(theta),
                           wrap_angle(theta + _uniform(rng, -0.2, 0.2)))
        q_goal, ee_local = _random_joints_near(chain, rng, q_start,
                                               _GOAL_SCALE, (0.45, 0.68),
                                               (0.20, 0.60), fwd_x=0.35)
        target = gamma_to_world(b_final, ee_local)
        beyond = float(np.linalg.norm(target.position - mount0))
        dp, dr = pose_delta(ee0, target)
        if (beyond > chain.total_reach + 0.12 and 0.55 <= dp <= 1.10
                and dr <= 1.0):
            break
    else:
        raise _Retry
    ty = float(target.position[1])
    scene = Scene((), AxisBox(
        np.array([-0.9, min(-0.9, ty - 0.8), -0.1]),
        np.array([max(2.1, float(target.position[0]) + 0.7),
                  max(0.9, ty + 0.8), 1.3])))
    script = (WaypointPair(ee0, start.base, gamma_to_base(start.base, target),
                           1.0),)
    walk = math.hypot(b_final.x, b_final.y)
    count = max(int(math.ceil(walk / 0.06)), 12)
    cert = _phase_certificate(start, [(b_final, q_goal, count)])
    return scene, start, script, cert, 0.05


def _build_corridor(rng, chain: KinematicChain):
    q_start = _jittered_home(rng)
    start = WholeBodyState(BasePose(0.0, 0.0, 0.0), q_start, 1.0)
    ee0 = forward_kinematics(chain, q_start)
    mount0 = _mount_world(chain, start.base)

    wall_x = _uniform(rng, 0.60, 0.72)
    gap_y = _uniform(rng, -0.15, 0.15)
    gap_half = _uniform(rng, 0.62, 0.74)
    length = 1.0
    walls = (
        AxisBox(np.array([wall_x - 0.06, gap_y + gap_half, 0.0]),
                np.array([wall_x + 0.06, gap_y + gap_half + length, 0.95])),
        AxisBox(np.array([wall_x - 0.06, gap_y - gap_half - length, 0.0]),
                np.array([wall_x + 0.06, gap_y - gap_half, 0.95])),
    )
    for _ in range(60):
        b_final = BasePose(wall_x + _uniform(rng, 0.35, 0.48),
                           gap_y + _uniform(rng, -0.08, 0.08),
                           _uniform(rng, -0.25, 0.25))
        q_goal, ee_local = _random_joints_near(chain, rng, q_start,
                                               _GOAL_SCALE, (0.42, 0.62),
                                               (0.25, 0.60), fwd_x=0.30,
                                               abs_y=0.30)
        target = gamma_to_world(b_final, ee_local)
        t_clear = float(min(w.distance(target.position[None, :])[0]
                            for w in walls))
        beyond = float(np.linalg.norm(target.position - mount0))
        dp, dr = pose_delta(ee0, target)
        if (t_clear >= _EPS0 + 0.06 and beyond > chain.total_reach + 0.10
                and dp <= 1.30 and dr <= 1.0):
            break
    else:
        raise _Retry

    bounds = AxisBox(
        np.array([-0.8, gap_y - gap_half - length - 0.15, -0.1]),
        np.array([wall_x + 1.3, gap_y + gap_half + length + 0.15, 1.15]))
    scene = Scene(walls, bounds)
    script = (WaypointPair(ee0, start.base, gamma_to_base(start.base, target),
                           1.0),)

    tuck = TUCK_JOINTS.copy()
    before = BasePose(wall_x - 0.40, gap_y, 0.0)
    after = BasePose(wall_x + 0.40, gap_y, 0.0)
    phases = [
        (start.base, tuck, 6),
        (before, tuck, max(int(math.ceil(math.hypot(before.x, before.y) / 0.08)), 6)),
        (after, tuck, 10),
        (b_final, tuck, max(int(math.ceil(math.hypot(
            b_final.x - after.x, b_final.y - after.y) / 0.08)), 4)),
        (b_final, q_goal, 8),
    ]
    cert = _phase_certificate(start, phases)
    return scene, start, script, cert, 0.04


def _solve_or_retry(chain: KinematicChain, target: Pose3, seed: np.ndarray,
                    max_iters: int = 200) -> np.ndarray:
    res = solve_ik(chain, target, seed, max_iters=max_iters)
    if not res.converged:
        raise _Retry
    return np.asarray(res.joints)


def _downward_grasp(rng, chain: KinematicChain, pos: np.ndarray,
                    seed: np.ndarray):
    """IK to ``pos`` with the flange pitched down, yawed toward the point."""
    for _ in range(8):
        yaw = math.atan2(pos[1], pos[0]) + _uniform(rng, -0.3, 0.3)
        pitch = _uniform(rng, 0.8, 1.2)
        quat = kernels.quat_mul(kernels.quat_from_yaw(yaw),
                                kernels.quat_from_axis_angle(
                                    np.array([0.0, 1.0, 0.0]), pitch))
        res = solve_ik(chain, Pose3(pos, quat), seed, max_iters=200)
        if res.converged:
            # the achievable pose, exactly: FK of the solution
            return np.asarray(res.joints), forward_kinematics(chain,
                                                              res.joints)
    raise _Retry


def _build_pick_place(rng, chain: KinematicChain):
    q_start = TABLE_START_JOINTS + rng.uniform(-0.08, 0.08,
                                               TABLE_START_JOINTS.shape[0])
    start = WholeBodyState(BasePose(0.0, 0.0, 0.0), q_start, 1.0)
    ee0 = forward_kinematics(chain, q_start)

    grasp_at = np.array([_uniform(rng, 0.56, 0.62), _uniform(rng, -0.20, 0.20),
                         _uniform(rng, 0.38, 0.44)])
    q_grasp, grasp = _downward_grasp(rng, chain, grasp_at, q_start)
    gx, gy, gz = (float(v) for v in grasp.position)
    if not (0.55 <= gx and abs(gy) <= 0.24 and 0.37 <= gz <= 0.45):
        raise _Retry
    # standoff grasp: flange 0.23 above the tabletop, 0.18 above the center
    # of a 10 cm tall object, so inflated flange points keep hinge clearance
    table_top = gz - 0.23
    object_center = np.array([gx, gy, gz - 0.18])

    side = -1.0 if gy >= 0.0 else 1.0
    place_y = side * _uniform(rng, 0.15, 0.30)
    place_x = _uniform(rng, max(0.55, gx - 0.10), gx + 0.14)
    place = Pose3(np.array([place_x, place_y, gz]), grasp.orientation)

    pre = Pose3(grasp.position + np.array([0.0, 0.0, 0.10]), grasp.orientation)
    pre_place = Pose3(place.position + np.array([0.0, 0.0, 0.10]),
                      place.orientation)
    q_pre = _solve_or_retry(chain, pre, q_grasp)
    q_place = _solve_or_retry(chain, place, q_pre)
    q_pre_place = _solve_or_retry(chain, pre_place, q_place)

    y_lo = min(gy, place_y) - 0.25
    y_hi = max(gy, place_y) + 0.25
    # front edge at x = 0.45 clears the pulled-back start arm by >= 0.15
    table = AxisBox(np.array([0.45, y_lo, table_top - 0.04]),
                    np.array([gx + 0.26, y_hi, table_top]))
    if not (table.min_corner[0] + 0.08 <= place_x <= table.max_corner[0] - 0.08):
        raise _Retry
    half = np.array([0.035, 0.035, 0.05])
    object_box = AxisBox(object_center - half, object_center + half,
                         is_target=True)
    bounds = AxisBox(np.array([-0.7, -1.0, -0.1]),
                     np.array([gx + 0.55, 1.0, 1.15]))
    scene = Scene((table, object_box), bounds)

    script = (
        WaypointPair(ee0, start.base, pre, 1.0),
        WaypointPair(pre, start.base, grasp, 0.2),
        WaypointPair(grasp, start.base, place, 1.0),
    )
    phases = [
        (start.base, q_pre, 8),
        (start.base, q_grasp, 5),
        (start.base, q_pre, 5),
        (start.base, q_pre_place, 8),
        (start.base, q_place, 5),
    ]
    cert = _phase_certificate(start, phases)
    return scene, start, script, cert, 0.035


_BUILDERS = {
    "free_space": _build_free_space,
    "out_of_reach": _build_out_of_reach,
    "corridor": _build_corridor,
    "pick_place": _build_pick_place,
}


def _family_checks(scn: Scenario) -> None:
    chain, start = scn.chain, scn.start_state
    mount0 = _mount_world(chain, start.base)
    final = gamma_to_world(scn.waypoint_script[-1].base_at_prediction,
                           scn.waypoint_script[-1].q_next)
    beyond = float(np.linalg.norm(final.position - mount0))
    if scn.family == "free_space":
        if scn.scene.active_obstacles():
            raise GenerationError(f"{scn.name}: free_space grew obstacles")
        if beyond >= chain.total_reach:
            raise GenerationError(f"{scn.name}: goal left arm reach")
    elif scn.family == "out_of_reach":
        if beyond <= chain.total_reach:
            raise GenerationError(f"{scn.name}: goal not beyond arm reach")
    elif scn.family == "corridor":
        if len(scn.scene.active_obstacles()) != 2:
            raise GenerationError(f"{scn.name}: corridor needs two walls")
    elif scn.family == "pick_place":
        if len(scn.waypoint_script) != 3:
            raise GenerationError(f"{scn.name}: pick_place needs 3 segments")


def generate_scenarios(family: str, count: int, seed: int) -> list:
    """Deterministic per (family, seed, index); certified feasible."""
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; expected one "
                         f"of {FAMILIES}")
    if count < 1:
        raise ValueError("count must be >= 1")
    if seed < 0:
        raise ValueError("seed must be non-negative")
    chain = default_chain()
    out = []
    for index in range(count):
        scenario = None
        for attempt in range(MAX_ATTEMPTS):
            rng = _rng(family, seed, index, attempt)
            try:
                scene, start, script, cert, res = _BUILDERS[family](rng, chain)
                candidate = Scenario(
                    name=f"{family}-s{seed}-{index:03d}",
                    family=family, scene=scene, chain=chain,
                    start_state=start, waypoint_script=script,
                    rng_seed=_scenario_seed(family, seed, index),
                    certificate=cert, field_resolution=res)
                _family_checks(candidate)
                validate_certificate(candidate, margin=GEN_MARGIN)
            except (_Retry, CertificateError):
                continue
            scenario = candidate
            break
        if scenario is None:
            raise GenerationError(
                f"no feasible {family} scenario for index {index} after "
                f"{MAX_ATTEMPTS} attempts (seed {seed})")
        out.append(scenario)
    return out


def _pose_dict(p: Pose3) -> dict:
    return {"position": [float(v) for v in p.position],
            "orientation": [float(v) for v in p.orientation]}


def _pose_from(d: dict) -> Pose3:
    return Pose3(np.array(d["position"]), np.array(d["orientation"]))


def _base_list(b: BasePose) -> list:
    return [float(b.x), float(b.y), float(b.yaw)]


def _primitive_dict(p) -> dict:
    if isinstance(p, AxisBox):
        return {"kind": "box", "min": [float(v) for v in p.min_corner],
                "max": [float(v) for v in p.max_corner],
                "is_target": bool(p.is_target)}
    if isinstance(p, Sphere):
        return {"kind": "sphere", "center": [float(v) for v in p.center],
                "radius": float(p.radius), "is_target": bool(p.is_target)}
    if isinstance(p, Cylinder):
        return {"kind": "cylinder",
                "base_center": [float(v) for v in p.base_center],
                "radius": float(p.radius), "height": float(p.height),
                "is_target": bool(p.is_target)}
    raise TypeError(f"unknown primitive {type(p).__name__}")


def _primitive_from(d: dict):
    kind = d["kind"]
    if kind == "box":
        return AxisBox(np.array(d["min"]), np.array(d["max"]),
                       is_target=d.get("is_target", False))
    if kind == "sphere":
        return Sphere(np.array(d["center"]), d["radius"],
                      is_target=d.get("is_target", False))
    if kind == "cylinder":
        return Cylinder(np.array(d["base_center"]), d["radius"], d["height"],
                        is_target=d.get("is_target", False))
    raise ValueError(f"unknown primitive kind {kind!r}")


def _state_dict(s: WholeBodyState) -> dict:
    return {"base": _base_list(s.base),
            "joints": [float(v) for v in s.joints],
            "gripper": float(s.gripper)}


def _state_from(d: dict) -> WholeBodyState:
    return WholeBodyState(BasePose(*d["base"]), np.array(d["joints"]),
                          d["gripper"])


def scenario_to_dict(scn: Scenario) -> dict:
    ws = scn.scene.workspace_bounds
    return {
        "name": scn.name,
        "family": scn.family,
        "rng_seed": scn.rng_seed,
        "field_resolution": scn.field_resolution,
        "scene": {
            "workspace_bounds": {
                "min": [float(v) for v in ws.min_corner],
                "max": [float(v) for v in ws.max_corner]},
            "obstacles": [_primitive_dict(p) for p in scn.scene.obstacles],
        },
        "chain": {
            "base_mount": _pose_dict(scn.chain.base_mount),
            "links": [{
                "offset": _pose_dict(link.offset),
                "axis": [float(v) for v in link.axis],
                "joint_limits": [link.joint_limits[0], link.joint_limits[1]],
            } for link in scn.chain.links],
        },
        "start_state": _state_dict(scn.start_state),
        "waypoint_script": [{
            "q_current": _pose_dict(wp.q_current),
            "base_at_prediction": _base_list(wp.base_at_prediction),
            "q_next": _pose_dict(wp.q_next),
            "gripper_next": float(wp.gripper_next),
        } for wp in scn.waypoint_script],
        "certificate": None if scn.certificate is None else {
            "states": [_state_dict(s) for s in scn.certificate.states]},
    }


def scenario_from_dict(d: dict) -> Scenario:
    ws = d["scene"]["workspace_bounds"]
    scene = Scene(
        tuple(_primitive_from(o) for o in d["scene"]["obstacles"]),
        AxisBox(np.array(ws["min"]), np.array(ws["max"])))
    chain = KinematicChain(
        links=[Link(_pose_from(ld["offset"]), np.array(ld["axis"]),
                    tuple(ld["joint_limits"])) for ld in d["chain"]["links"]],
        base_mount=_pose_from(d["chain"]["base_mount"]))
    script = tuple(WaypointPair(
        _pose_from(w["q_current"]), BasePose(*w["base_at_prediction"]),
        _pose_from(w["q_next"]), w["gripper_next"])
        for w in d["waypoint_script"])
    cert = None
    if d.get("certificate") is not None:
        cert = Trajectory([_state_from(s) for s in d["certificate"]["states"]])
    return Scenario(
        name=d["name"], family=d["family"], scene=scene, chain=chain,
        start_state=_state_from(d["start_state"]), waypoint_script=script,
        rng_seed=int(d["rng_seed"]), certificate=cert,
        field_resolution=float(d["field_resolution"]))


def save_scenarios(path, scenarios: Sequence[Scenario]) -> None:
    doc = {"schema_version": SCHEMA_VERSION,
           "scenarios": [scenario_to_dict(s) for s in scenarios]}
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
    except OSError as exc:
        raise RuntimeError(f"writing scenario file {path}: {exc}") from exc


def load_scenarios(path, validate: bool = True) -> list:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise RuntimeError(f"reading scenario file {path}: {exc}") from exc
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"scenario file {path} has schema_version "
                         f"{version!r}; expected {SCHEMA_VERSION}")
    scenarios = [scenario_from_dict(d) for d in doc["scenarios"]]
    if validate:
        for scn in scenarios:
            if scn.certificate is not None:
                validate_certificate(scn)
    return scenarios
