"""Segment planning: initialization, search contracts, budgets, episodes."""

import math
from dataclasses import replace

import numpy as np
import pytest

from mobiplan import (
    AxisBox,
    BasePose,
    CostContext,
    CostWeights,
    PlannerConfig,
    Pose3,
    Scene,
    SearchMode,
    WaypointPair,
    WholeBodyState,
    default_chain,
    effective_track_start,
    forward_kinematics,
    gamma_to_world,
    init_trajectory,
    lift_waypoint,
    plan_episode,
    plan_segment,
    pose_delta,
    total_objective,
)
from mobiplan.planner import interpolation_steps
from mobiplan.scene import empty_field, sample_query_points

# small but legal budgets keep every planning test under a second
EASY_CFG = PlannerConfig(anneal_evals=16, n_up=2, n_low=1,
                         max_outer_rounds=2, rng_seed=5)
CHEAP_CFG = PlannerConfig(step_size=0.2, anneal_evals=16, n_up=1, n_low=1,
                          max_outer_rounds=1, rng_seed=3)

IDENT = Pose3(np.zeros(3), np.array([1.0, 0.0, 0.0, 0.0]))


def _ee_world(chain, state):
    return gamma_to_world(state.base, forward_kinematics(chain, state.joints))


@pytest.fixture(scope="module")
def ctx(chain):
    scene = Scene(workspace_bounds=AxisBox([-2, -2, -0.1], [2, 2, 1.5]))
    qps = sample_query_points(
        chain, AxisBox([-0.25, -0.2, 0.0], [0.25, 0.2, 0.25]), 32, 0)
    return CostContext(chain, empty_field(scene), qps, CostWeights())


@pytest.fixture(scope="module")
def start(chain):
    return WholeBodyState(BasePose(0.0, 0.0, 0.0),
                          np.zeros(chain.n_joints), 1.0)


def _easy_pair(chain, gripper=0.4):
    home = forward_kinematics(chain, np.zeros(chain.n_joints))
    target = Pose3(home.position + np.array([0.0, 0.10, 0.02]),
                   home.orientation)
    return WaypointPair(home, BasePose(0.0, 0.0, 0.0), target,
                        gripper_next=gripper)


@pytest.fixture(scope="module")
def easy_plan(chain, ctx, start):
    wp = _easy_pair(chain)
    return wp, plan_segment(start, wp, ctx, EASY_CFG)


def test_interpolation_steps_translation():
    b = Pose3(np.array([0.23, 0.0, 0.0]), IDENT.orientation)
    assert interpolation_steps(IDENT, b, 0.05) == 5
    # an exact multiple must not round up an extra step
    c = Pose3(np.array([0.25, 0.0, 0.0]), IDENT.orientation)
    assert interpolation_steps(IDENT, c, 0.05) == 5


def test_interpolation_steps_rotation_dominates():
    yaw = 0.12
    quat = np.array([math.cos(yaw / 2), 0.0, 0.0, math.sin(yaw / 2)])
    b = Pose3(np.array([0.01, 0.0, 0.0]), quat)
    # translation alone needs 1 step, the 0.12 rad turn needs 3
    assert interpolation_steps(IDENT, b, 0.05) == 3


def test_interpolation_steps_floor_is_one():
    assert interpolation_steps(IDENT, IDENT, 0.05) == 1


def test_lift_waypoint_applies_anchor_base():
    base = BasePose(1.0, 2.0, math.pi / 2)
    wp = WaypointPair(Pose3(np.array([1.0, 0.0, 0.5]), IDENT.orientation),
                      base,
                      Pose3(np.array([0.0, -1.0, 0.2]), IDENT.orientation))
    cur, nxt = lift_waypoint(wp)
    assert np.allclose(cur.position, [1.0, 3.0, 0.5], atol=1e-12)
    assert np.allclose(nxt.position, [2.0, 2.0, 0.2], atol=1e-12)
    dp, dr = pose_delta(cur, gamma_to_world(base, wp.q_current))
    assert dp < 1e-12 and dr < 1e-7


def test_waypoint_pair_gripper_range():
    with pytest.raises(ValueError):
        _easy_pair(default_chain(), gripper=1.5)
    with pytest.raises(ValueError):
        _easy_pair(default_chain(), gripper=-0.1)
    assert _easy_pair(default_chain(), gripper=0.3).gripper_next == 0.3


def test_effective_track_start_prefers_nominal(chain, start):
    actual = _ee_world(chain, start)
    near = Pose3(actual.position + np.array([0.0, 0.05, 0.0]),
                 actual.orientation)
    # 0.05 m of drift sits inside the ten-tolerance window at mu_s = 0.01
    assert effective_track_start(start, near, chain, 0.01) is near


def test_effective_track_start_recovers_from_drift(chain, start):
    far = Pose3(np.array([0.0, 0.8, 0.6]), IDENT.orientation)
    eff = effective_track_start(start, far, chain, 0.01)
    dp, dr = pose_delta(eff, _ee_world(chain, start))
    assert dp < 1e-12 and dr < 1e-7


def test_init_trajectory_endpoints_and_spacing(chain, start):
    a = _ee_world(chain, start)
    b = Pose3(a.position + np.array([-0.12, 0.21, 0.04]),
              np.array([math.cos(0.15), 0.0, 0.0, math.sin(0.15)]))
    cfg = EASY_CFG
    traj = init_trajectory(start, a, b, cfg, chain=chain)
    track = traj.ee_targets
    assert len(traj) == len(track)
    dp0, dr0 = pose_delta(track[0], a)
    dpn, drn = pose_delta(track[-1], b)
    assert max(dp0, dpn) < 1e-12 and max(dr0, drn) < 1e-7
    for s in traj.states:
        assert np.array_equal(s.base.as_array(), start.base.as_array())
        assert np.array_equal(s.joints, start.joints)
    for p, q in zip(track, track[1:]):
        dp, dr = pose_delta(p, q)
        assert dp <= cfg.step_size + 1e-9
        assert dr <= cfg.step_size + 1e-9


def test_init_trajectory_rejects_inconsistent_start(chain, start):
    far = Pose3(np.array([0.0, 0.8, 0.6]), IDENT.orientation)
    with pytest.raises(ValueError):
        init_trajectory(start, far, far, EASY_CFG, chain=chain)


def test_planner_config_validation():
    with pytest.raises(ValueError):
        PlannerConfig(anneal_evals=15)
    with pytest.raises(ValueError):
        PlannerConfig(step_size=0.0)
    with pytest.raises(ValueError):
        PlannerConfig(mu_s=0.0)
    with pytest.raises(ValueError):
        PlannerConfig(n_up=0)
    with pytest.raises(ValueError):
        PlannerConfig(max_outer_rounds=0)
    with pytest.raises(ValueError):
        PlannerConfig(search_mode="bilevel")
    with pytest.raises(ValueError):
        PlannerConfig(ee_pos_halfwidth=-0.1)


def test_plan_segment_converges_on_easy_target(chain, ctx, easy_plan):
    wp, plan = easy_plan
    assert plan.converged
    _, goal = lift_waypoint(wp)
    dp, _ = pose_delta(_ee_world(chain, plan.trajectory.states[-1]), goal)
    assert dp <= EASY_CFG.mu_s
    assert plan.report.min_distance >= 0.0
    assert all(r.converged for r in plan.report.ik_results)
    assert 1 <= plan.outer_rounds_used <= EASY_CFG.max_outer_rounds
    assert plan.wall_time_ms > 0.0


def test_plan_segment_report_matches_recomputation(ctx, easy_plan):
    # the returned trajectory is a fixed point of re-evaluation
    _, plan = easy_plan
    again = total_objective(plan.trajectory, ctx)
    assert again.reach == plan.report.reach
    assert again.smooth == plan.report.smooth
    assert again.collide == plan.report.collide
    assert again.min_distance == plan.report.min_distance
    assert again.total == plan.report.total


def test_plan_segment_never_worse_than_interpolation(chain, ctx, start,
                                                     easy_plan):
    wp, plan = easy_plan
    cur, nxt = lift_waypoint(wp)
    eff = effective_track_start(start, cur, chain, EASY_CFG.mu_s)
    init = init_trajectory(start, eff, nxt, EASY_CFG, chain=chain)
    assert plan.report.total <= total_objective(init, ctx).total + 1e-9


def test_plan_segment_respects_eval_budget(easy_plan):
    _, plan = easy_plan
    budget = EASY_CFG.anneal_evals * (EASY_CFG.n_up + EASY_CFG.n_low) \
        * EASY_CFG.max_outer_rounds
    assert plan.objective_evals <= budget


def test_plan_segment_deterministic(chain, ctx, start, easy_plan):
    wp, first = easy_plan
    second = plan_segment(start, wp, ctx, EASY_CFG)
    for a, b in zip(first.trajectory.states, second.trajectory.states):
        assert np.array_equal(a.base.as_array(), b.base.as_array())
        assert np.array_equal(a.joints, b.joints)
        assert a.gripper == b.gripper
    assert first.report.total == second.report.total
    assert first.objective_evals == second.objective_evals


def test_plan_segment_seed_moves_search(chain, ctx, start, easy_plan):
    wp, first = easy_plan
    other = plan_segment(start, wp, ctx, replace(EASY_CFG, rng_seed=6))
    b1 = np.stack([s.base.as_array() for s in first.trajectory.states])
    b2 = np.stack([s.base.as_array() for s in other.trajectory.states])
    assert not np.array_equal(b1, b2)


def test_plan_segment_recovers_from_drifted_start(chain, ctx):
    # joints far from the waypoint's implied posture: the track must begin
    # at the arm's actual pose instead of raising a consistency error
    drifted = WholeBodyState(BasePose(0.0, 0.0, 0.0),
                             np.array([0.3, -0.4, 0.5, 0.2, -0.3, 0.1]), 1.0)
    wp = _easy_pair(chain)
    cur, _ = lift_waypoint(wp)
    dp, _ = pose_delta(_ee_world(chain, drifted), cur)
    assert dp > 10.0 * CHEAP_CFG.mu_s
    plan = plan_segment(drifted, wp, ctx, CHEAP_CFG)
    dp0, dr0 = pose_delta(plan.trajectory.ee_targets[0],
                          _ee_world(chain, drifted))
    assert dp0 < 1e-12 and dr0 < 1e-7
    assert math.isfinite(plan.report.total)


def test_direct_mode_uses_matched_budget(chain, ctx, start, easy_plan):
    wp, bilevel = easy_plan
    cfg = replace(EASY_CFG, search_mode=SearchMode.DIRECT)
    plan = plan_segment(start, wp, ctx, cfg)
    budget = cfg.anneal_evals * (cfg.n_up + cfg.n_low) \
        * cfg.max_outer_rounds
    # direct mode has no convergence early-out, so it always spends the
    # whole allowance apart from bookkeeping passes
    assert budget - 8 <= plan.objective_evals <= budget
    assert bilevel.objective_evals <= budget
    assert plan.outer_rounds_used == 1
    assert plan.converged


def test_direct_mode_rejects_budget_below_dimension(chain, ctx, start):
    home = forward_kinematics(chain, np.zeros(chain.n_joints))
    far = Pose3(home.position + np.array([0.0, 0.6, 0.0]),
                home.orientation)
    wp = WaypointPair(home, BasePose(0.0, 0.0, 0.0), far)
    cfg = replace(CHEAP_CFG, step_size=0.05,
                  search_mode=SearchMode.DIRECT)
    # 0.6 m at 0.05 m spacing gives 12 free samples = 120 dimensions,
    # far beyond the 16 * 2 * 1 evaluation allowance
    with pytest.raises(ValueError, match="direct-mode budget"):
        plan_segment(start, wp, ctx, cfg)


def test_plan_episode_chains_final_states(chain, ctx, start):
    home = forward_kinematics(chain, np.zeros(chain.n_joints))
    mid = Pose3(home.position + np.array([0.0, 0.10, 0.02]),
                home.orientation)
    end = Pose3(home.position + np.array([-0.06, 0.16, 0.0]),
                home.orientation)
    anchor = BasePose(0.0, 0.0, 0.0)
    pairs = [WaypointPair(home, anchor, mid, gripper_next=0.4),
             WaypointPair(mid, anchor, end, gripper_next=0.9)]
    results = plan_episode(pairs, start, ctx, EASY_CFG)
    assert len(results) == 2
    handoff = results[0].trajectory.states[-1]
    opening = results[1].trajectory.states[0]
    assert np.array_equal(handoff.base.as_array(), opening.base.as_array())
    assert handoff.gripper == 0.4
    assert opening.gripper == 0.4
    assert results[1].trajectory.states[-1].gripper == 0.9
    assert results[0].converged and results[1].converged


def test_plan_episode_continues_after_failure(chain, ctx, start):
    home = forward_kinematics(chain, np.zeros(chain.n_joints))
    # 1.3 m is above the arm's highest attainable point from any base pose
    sky = Pose3(np.array([home.position[0], 0.0, 1.3]), home.orientation)
    back = Pose3(home.position + np.array([0.0, 0.10, 0.0]),
                 home.orientation)
    anchor = BasePose(0.0, 0.0, 0.0)
    pairs = [WaypointPair(home, anchor, sky),
             WaypointPair(sky, anchor, back)]
    results = plan_episode(pairs, start, ctx, CHEAP_CFG)
    assert len(results) == 2
    assert not results[0].converged
    assert math.isfinite(results[1].report.total)


def test_plan_episode_rejects_empty(ctx, start):
    with pytest.raises(ValueError):
        plan_episode([], start, ctx, EASY_CFG)
