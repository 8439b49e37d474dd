"""Whole-body trajectory optimization for mobile manipulators.

The planner takes a sequence of end-effector waypoints expressed in the
start base frame and produces a synchronized base + arm trajectory by
alternating annealing searches over base placement and end-effector
micro-adjustments, scored by reachability, smoothness, and clearance.
"""

from .geometry import (
    BasePose,
    Pose3,
    gamma_to_base,
    gamma_to_world,
    interpolate_pose,
    lift_to_pose3,
    pose_delta,
    wrap_angle,
)
from .kinematics import (
    IKResult,
    IKStatus,
    KinematicChain,
    Link,
    default_chain,
    forward_kinematics,
    solve_ik,
)
from .scene import (
    AxisBox,
    CapacityError,
    Cylinder,
    DistanceField,
    QueryPointSet,
    Scene,
    Sphere,
    analytic_distance,
    build_field,
    materialize_points,
    sample_query_points,
)
from .costs import (
    CostContext,
    CostWeights,
    ObjectiveReport,
    Trajectory,
    WholeBodyState,
    collision_cost,
    reachability_cost,
    sample_arm_candidates,
    smoothness_cost,
    topk_weighted_sum,
    total_objective,
    upper_objective,
)
from .annealing import (
    AnnealConfig,
    AnnealResult,
    SearchSpace,
    local_refine,
    minimize,
)
from .planner import (
    PlannerConfig,
    PlanResult,
    SearchMode,
    WaypointPair,
    effective_track_start,
    init_trajectory,
    lift_waypoint,
    plan_episode,
    plan_segment,
)

__version__ = "0.1.0"
