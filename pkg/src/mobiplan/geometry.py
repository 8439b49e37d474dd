"""Rigid-body poses, the planar base lift, and pose interpolation.

Pose3 carries position plus a unit quaternion (w, x, y, z), canonicalized
to w >= 0 so the double cover never leaks into comparisons. The mobile base
lives in SE(2); ``lift_to_pose3`` embeds it into SE(3) and ``gamma_to_world``
composes it with an end-effector pose expressed in the base frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    return a - 2.0 * math.pi * math.ceil((a - math.pi) / (2.0 * math.pi))


def _as_readonly(a, shape) -> np.ndarray:
    arr = np.array(a, dtype=np.float64).reshape(shape)
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite component")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Pose3:
    """Rigid transform: position in meters, orientation quaternion (w,x,y,z)."""

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(
        default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    def __post_init__(self):
        pos = _as_readonly(self.position, (3,))
        q = np.array(self.orientation, dtype=np.float64).reshape(4)
        if not np.all(np.isfinite(q)):
            raise ValueError("non-finite quaternion")
        norm = float(np.linalg.norm(q))
        if norm < 1e-9:
            raise ValueError("zero-norm quaternion")
        # skip the divide when already unit: keeps construction idempotent,
        # so round-tripping a pose through arrays preserves exact bits
        if abs(norm - 1.0) > 1e-12:
            q = q / norm
        if q[0] < 0.0:
            q = -q
        q.setflags(write=False)
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "orientation", q)

    @staticmethod
    def identity() -> "Pose3":
        return Pose3()

    def compose(self, other: "Pose3") -> "Pose3":
        """this ∘ other (apply other in this pose's frame)."""
        pos = self.position + kernels.quat_rotate(self.orientation,
                                                  other.position)
        q = kernels.quat_mul(self.orientation, other.orientation)
        return Pose3(pos, q)

    def inverse(self) -> "Pose3":
        qc = kernels.quat_conj(self.orientation)
        return Pose3(-kernels.quat_rotate(qc, self.position), qc)

    def transform_point(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=np.float64)
        return self.position + kernels.quat_rotate(self.orientation, p)


@dataclass(frozen=True)
class BasePose:
    """Planar base pose: x, y in meters, yaw wrapped to (-pi, pi]."""

    x: float = 0.0
    y: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        for v in (self.x, self.y, self.yaw):
            if not math.isfinite(v):
                raise ValueError("non-finite base pose")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "yaw", wrap_angle(float(self.yaw)))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.yaw])


def lift_to_pose3(base: BasePose) -> Pose3:
    """Embed an SE(2) base pose into SE(3): zero z, rotation about +z only."""
    return Pose3(np.array([base.x, base.y, 0.0]),
                 kernels.quat_from_yaw(base.yaw))


def gamma_to_world(base: BasePose, ee_in_base: Pose3) -> Pose3:
    """Lift the base pose and compose: the waypoint transform to world frame."""
    return lift_to_pose3(base).compose(ee_in_base)


def gamma_to_base(base: BasePose, ee_in_world: Pose3) -> Pose3:
    """Inverse of gamma_to_world: express a world pose in the base frame."""
    return lift_to_pose3(base).inverse().compose(ee_in_world)


def pose_delta(a: Pose3, b: Pose3) -> tuple:
    """(Euclidean translation distance, geodesic rotation angle in [0, pi])."""
    t = float(np.linalg.norm(b.position - a.position))
    r = float(kernels.quat_angle_between(a.orientation, b.orientation))
    return t, r


def interpolate_pose(a: Pose3, b: Pose3, s: float) -> Pose3:
    """Linear position blend + shortest-path slerp, s in [0, 1]."""
    if not 0.0 <= s <= 1.0:
        raise ValueError("interpolation parameter outside [0, 1]")
    pos = (1.0 - s) * a.position + s * b.position
    qa = a.orientation
    qb = b.orientation.copy()
    dot = float(np.dot(qa, qb))
    if dot < 0.0:
        qb = -qb
        dot = -dot
    if dot > 1.0 - 1e-12:
        q = (1.0 - s) * qa + s * qb
    else:
        theta = math.acos(min(dot, 1.0))
        q = (math.sin((1.0 - s) * theta) * qa + math.sin(s * theta) * qb) \
            / math.sin(theta)
    return Pose3(pos, q)
