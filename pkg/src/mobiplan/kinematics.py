"""Serial-chain forward kinematics and the damped-least-squares IK solver.

The IK iteration count is what the reachability cost consumes, so the solver
reports exactly how many DLS updates it performed. Restart probes inside the
solver are deterministic; identical inputs give identical results.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .geometry import Pose3

IK_TOL_POS = 1e-3
IK_TOL_ROT = 1e-2
DLS_DAMPING = 1e-3
DLS_STEP_CAP = 0.5
DEFAULT_MAX_ITERS = 100


class IKStatus(enum.Enum):
    CONVERGED = "converged"
    ITERATION_BUDGET_EXCEEDED = "iteration_budget_exceeded"


@dataclass(frozen=True)
class Link:
    """One revolute joint: rotation about ``axis`` followed by ``offset``."""

    offset: Pose3
    axis: np.ndarray
    joint_limits: tuple

    def __post_init__(self):
        ax = np.array(self.axis, dtype=np.float64).reshape(3)
        norm = float(np.linalg.norm(ax))
        if not np.all(np.isfinite(ax)) or norm < 1e-9:
            raise ValueError("joint axis must be a finite nonzero vector")
        ax = ax / norm
        ax.setflags(write=False)
        lo, hi = (float(v) for v in self.joint_limits)
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ValueError("joint limits must satisfy lo < hi")
        object.__setattr__(self, "axis", ax)
        object.__setattr__(self, "joint_limits", (lo, hi))


@dataclass(frozen=True)
class KinematicChain:
    """Revolute chain mounted on the base at ``base_mount``.

    Frame i sits at joint i's origin after the joint rotation; ``offset``
    then maps frame i to joint i+1 (the last offset reaches the flange).
    """

    links: Sequence[Link]
    base_mount: Pose3 = field(default_factory=Pose3)

    def __post_init__(self):
        links = tuple(self.links)
        if len(links) < 2:
            raise ValueError("chain needs at least 2 joints")
        reach = sum(float(np.linalg.norm(l.offset.position)) for l in links)
        if reach <= 0.0:
            raise ValueError("chain has zero total reach")
        object.__setattr__(self, "links", links)
        n = len(links)
        packed = {
            "mount_pos": np.ascontiguousarray(self.base_mount.position),
            "mount_quat": np.ascontiguousarray(self.base_mount.orientation),
            "off_pos": np.ascontiguousarray(
                [l.offset.position for l in links]),
            "off_quat": np.ascontiguousarray(
                [l.offset.orientation for l in links]),
            "axes": np.ascontiguousarray([l.axis for l in links]),
            "lo": np.array([l.joint_limits[0] for l in links]),
            "hi": np.array([l.joint_limits[1] for l in links]),
        }
        for arr in packed.values():
            arr.setflags(write=False)
        object.__setattr__(self, "_packed", packed)
        object.__setattr__(self, "n_joints", n)

    @property
    def lower_limits(self) -> np.ndarray:
        return self._packed["lo"]

    @property
    def upper_limits(self) -> np.ndarray:
        return self._packed["hi"]

    @property
    def total_reach(self) -> float:
        return float(np.sum(np.linalg.norm(self._packed["off_pos"], axis=1)))

    def packed(self) -> tuple:
        """Arrays in kernel argument order (mount, offsets, axes, limits)."""
        p = self._packed
        return (p["mount_pos"], p["mount_quat"], p["off_pos"], p["off_quat"],
                p["axes"], p["lo"], p["hi"])

    def check_joints(self, q) -> np.ndarray:
        # always a fresh writable copy: keeps the kernels compiled for a
        # single argument signature regardless of caller array flags
        q = np.array(q, dtype=np.float64)
        if q.shape != (self.n_joints,):
            raise ValueError(
                f"expected {self.n_joints} joint angles, got shape {q.shape}")
        if not np.all(np.isfinite(q)):
            raise ValueError("non-finite joint angles")
        return q

    def clamp_joints(self, q) -> np.ndarray:
        q = self.check_joints(q)
        return np.clip(q, self.lower_limits, self.upper_limits)


@dataclass(frozen=True)
class IKResult:
    status: IKStatus
    joints: np.ndarray
    iterations: int
    residual: tuple  # (meters, radians)

    @property
    def converged(self) -> bool:
        return self.status is IKStatus.CONVERGED


def forward_kinematics(chain: KinematicChain, q) -> Pose3:
    """End-effector pose in the base frame."""
    q = chain.check_joints(q)
    p = chain._packed
    ee_pos, ee_quat = kernels.fk_ee(p["mount_pos"], p["mount_quat"],
                                    p["off_pos"], p["off_quat"],
                                    p["axes"], q)
    return Pose3(ee_pos, ee_quat)


def joint_frames(chain: KinematicChain, q) -> tuple:
    """Per-joint frames (positions (n,3), quaternions (n,4)) in base frame."""
    q = chain.check_joints(q)
    p = chain._packed
    joint_pos, joint_quat, _, _ = kernels.fk_frames(
        p["mount_pos"], p["mount_quat"], p["off_pos"], p["off_quat"],
        p["axes"], q)
    return joint_pos, joint_quat


def solve_ik(chain: KinematicChain, target: Pose3, seed,
             max_iters: int = DEFAULT_MAX_ITERS) -> IKResult:
    """Damped-least-squares IK; budget exhaustion is a status, not an error."""
    seed = chain.check_joints(seed)
    if max_iters < 0:
        raise ValueError("max_iters must be >= 0")
    p = chain._packed
    q, iters, flag, res_p, res_r = kernels.ik_dls(
        p["mount_pos"], p["mount_quat"], p["off_pos"], p["off_quat"],
        p["axes"], p["lo"], p["hi"],
        np.array(target.position), np.array(target.orientation),
        seed, max_iters,
        IK_TOL_POS, IK_TOL_ROT, DLS_DAMPING, DLS_STEP_CAP)
    status = (IKStatus.CONVERGED if flag == kernels.IK_CONVERGED
              else IKStatus.ITERATION_BUDGET_EXCEEDED)
    q = np.asarray(q)
    q.setflags(write=False)
    return IKResult(status, q, int(iters), (float(res_p), float(res_r)))


def default_chain() -> KinematicChain:
    """6-DoF arm: yaw shoulder, two pitch links, spherical wrist, ~0.9 m reach."""
    x = np.array([1.0, 0.0, 0.0])
    y = np.array([0.0, 1.0, 0.0])
    z = np.array([0.0, 0.0, 1.0])

    def link(dx, dy, dz, axis, lim):
        return Link(Pose3(np.array([dx, dy, dz])), axis, (-lim, lim))

    return KinematicChain(
        links=[
            link(0.0, 0.0, 0.12, z, 3.0),
            link(0.35, 0.0, 0.0, y, 2.2),
            link(0.30, 0.0, 0.0, y, 2.5),
            link(0.0, 0.0, 0.0, x, 3.0),
            link(0.0, 0.0, 0.0, y, 2.0),
            link(0.13, 0.0, 0.0, x, 3.0),
        ],
        base_mount=Pose3(np.array([0.0, 0.0, 0.2])),
    )
