"""Obstacle primitives, signed distance fields, and robot surface points.

Scenes are unions of analytic primitives (sphere, axis-aligned box, z-aligned
cylinder), so exact signed distances are available as an oracle. The planner
itself queries a dense voxel grid built from that oracle via trilinear
interpolation; for a 1-Lipschitz field the interpolation error is bounded by
resolution * sqrt(3)/2.

Primitives flagged ``is_target`` (the object being manipulated) are excluded
from every distance, mirroring target-mask removal during reconstruction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from . import kernels
from .kinematics import KinematicChain, joint_frames

LARGE_DISTANCE = kernels.FREE_SPACE_DISTANCE
DEFAULT_RESOLUTION = 0.02
DEFAULT_N_QUERY_POINTS = 64
DEFAULT_MAX_VOXELS = 40_000_000
FIELD_PADDING = 0.2  # >= 2 * epsilon0
LINK_RADIUS = 0.04  # half-width of per-link bounding boxes


class CapacityError(RuntimeError):
    """Grid would exceed the voxel budget."""


def _vec3(v) -> np.ndarray:
    arr = np.array(v, dtype=np.float64).reshape(3)
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite coordinates")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray
    radius: float
    is_target: bool = False

    def __post_init__(self):
        object.__setattr__(self, "center", _vec3(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0.0:
            raise ValueError("sphere radius must be positive")

    def aabb(self) -> tuple:
        return self.center - self.radius, self.center + self.radius

    def distance(self, pts: np.ndarray) -> np.ndarray:
        return np.linalg.norm(pts - self.center, axis=-1) - self.radius


@dataclass(frozen=True)
class AxisBox:
    min_corner: np.ndarray
    max_corner: np.ndarray
    is_target: bool = False

    def __post_init__(self):
        object.__setattr__(self, "min_corner", _vec3(self.min_corner))
        object.__setattr__(self, "max_corner", _vec3(self.max_corner))
        if not np.all(self.max_corner > self.min_corner):
            raise ValueError("box extents must be positive")

    def aabb(self) -> tuple:
        return self.min_corner, self.max_corner

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.min_corner + self.max_corner)

    @property
    def half_extents(self) -> np.ndarray:
        return 0.5 * (self.max_corner - self.min_corner)

    def surface_area(self) -> float:
        w, d, h = self.max_corner - self.min_corner
        return 2.0 * (w * d + d * h + h * w)

    def contains(self, other_min, other_max, tol: float = 1e-9) -> bool:
        return bool(np.all(other_min >= self.min_corner - tol)
                    and np.all(other_max <= self.max_corner + tol))

    def distance(self, pts: np.ndarray) -> np.ndarray:
        q = np.abs(pts - self.center) - self.half_extents
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(q.max(axis=-1), 0.0)
        return outside + inside


@dataclass(frozen=True)
class Cylinder:
    """Vertical cylinder: base disc center, radius, height upward (+z)."""

    base_center: np.ndarray
    radius: float
    height: float
    is_target: bool = False

    def __post_init__(self):
        object.__setattr__(self, "base_center", _vec3(self.base_center))
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "height", float(self.height))
        if not (self.radius > 0.0 and self.height > 0.0):
            raise ValueError("cylinder radius and height must be positive")

    def aabb(self) -> tuple:
        r = self.radius
        lo = self.base_center - np.array([r, r, 0.0])
        hi = self.base_center + np.array([r, r, self.height])
        return lo, hi

    def distance(self, pts: np.ndarray) -> np.ndarray:
        rel = pts - self.base_center
        dr = np.hypot(rel[..., 0], rel[..., 1]) - self.radius
        dz = np.abs(rel[..., 2] - 0.5 * self.height) - 0.5 * self.height
        outside = np.hypot(np.maximum(dr, 0.0), np.maximum(dz, 0.0))
        inside = np.minimum(np.maximum(dr, dz), 0.0)
        return outside + inside


Primitive = Union[Sphere, AxisBox, Cylinder]


@dataclass(frozen=True)
class Scene:
    obstacles: Sequence[Primitive] = ()
    workspace_bounds: AxisBox = field(default_factory=lambda: AxisBox(
        np.array([-3.0, -3.0, -0.1]), np.array([3.0, 3.0, 2.0])))

    def __post_init__(self):
        obstacles = tuple(self.obstacles)
        for prim in obstacles:
            lo, hi = prim.aabb()
            if not self.workspace_bounds.contains(lo, hi):
                raise ValueError("primitive outside workspace bounds")
        object.__setattr__(self, "obstacles", obstacles)

    def active_obstacles(self) -> tuple:
        return tuple(p for p in self.obstacles if not p.is_target)


def analytic_distance(scene: Scene, p) -> float:
    """Exact signed distance to the nearest non-target primitive surface."""
    p = np.asarray(p, dtype=np.float64).reshape(3)
    if not np.all(np.isfinite(p)):
        raise ValueError("non-finite query point")
    best = LARGE_DISTANCE
    for prim in scene.active_obstacles():
        best = min(best, float(prim.distance(p)))
    return best


def batch_distance(scene: Scene, pts: np.ndarray) -> np.ndarray:
    """Vectorized analytic signed distance for (..., 3) points."""
    pts = np.asarray(pts, dtype=np.float64)
    out = np.full(pts.shape[:-1], LARGE_DISTANCE)
    for prim in scene.active_obstacles():
        np.minimum(out, prim.distance(pts), out=out)
    return out


@dataclass(frozen=True)
class DistanceField:
    origin: np.ndarray
    resolution: float
    values: np.ndarray  # (nx, ny, nz) signed meters

    def __post_init__(self):
        object.__setattr__(self, "origin", _vec3(self.origin))
        object.__setattr__(self, "resolution", float(self.resolution))
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim != 3 or min(values.shape) < 2:
            raise ValueError("field needs at least 2 nodes per axis")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def dims(self) -> tuple:
        return self.values.shape

    @property
    def inv_resolution(self) -> float:
        return 1.0 / self.resolution

    def query(self, p) -> float:
        """Trilinear interpolation; outside the grid clamps to the boundary."""
        p = np.array(p, dtype=np.float64).reshape(3)
        return float(kernels.trilinear_query(self.values, self.origin,
                                             self.inv_resolution, p))

    def query_many(self, pts: np.ndarray) -> np.ndarray:
        pts = np.array(pts, dtype=np.float64).reshape(-1, 3)
        out = np.empty(pts.shape[0])
        for i in range(pts.shape[0]):
            out[i] = kernels.trilinear_query(self.values, self.origin,
                                             self.inv_resolution, pts[i])
        return out

    def node_coords(self, axis: int) -> np.ndarray:
        return self.origin[axis] + self.resolution * np.arange(
            self.dims[axis])

    def slice_rows(self, z: float):
        """(x, y, distance) rows at height z, for debugging dumps."""
        xs = self.node_coords(0)
        ys = self.node_coords(1)
        rows = []
        for x in xs:
            for y in ys:
                rows.append((float(x), float(y),
                             self.query(np.array([x, y, z]))))
        return rows


def empty_field(scene: Scene, resolution: float = 0.5) -> DistanceField:
    """Minimal all-free field covering the workspace (for obstacle-free runs)."""
    ws = scene.workspace_bounds
    origin = ws.min_corner - FIELD_PADDING
    span = ws.max_corner - ws.min_corner + 2.0 * FIELD_PADDING
    dims = np.maximum(np.ceil(span / resolution).astype(int) + 1, 2)
    values = np.full(tuple(dims), LARGE_DISTANCE)
    return DistanceField(origin, resolution, values)


def build_field(scene: Scene, resolution: float = DEFAULT_RESOLUTION,
                max_voxels: int = DEFAULT_MAX_VOXELS) -> DistanceField:
    """Dense ESDF over the padded workspace, sampled from the analytic oracle."""
    if not resolution > 0.0:
        raise ValueError("resolution must be positive")
    ws = scene.workspace_bounds
    origin = ws.min_corner - FIELD_PADDING
    span = ws.max_corner - ws.min_corner + 2.0 * FIELD_PADDING
    dims = np.maximum(np.ceil(span / resolution).astype(int) + 1, 2)
    n_nodes = int(np.prod(dims))
    if n_nodes > max_voxels:
        raise CapacityError(
            f"{n_nodes} voxels exceed the budget of {max_voxels}")

    xs = origin[0] + resolution * np.arange(dims[0])
    ys = origin[1] + resolution * np.arange(dims[1])
    zs = origin[2] + resolution * np.arange(dims[2])
    values = np.empty(tuple(dims))
    # Slab by x to keep the point buffer small.
    gy, gz = np.meshgrid(ys, zs, indexing="ij")
    slab = np.empty((dims[1], dims[2], 3))
    slab[..., 1] = gy
    slab[..., 2] = gz
    for ix, x in enumerate(xs):
        slab[..., 0] = x
        values[ix] = np.minimum(batch_distance(scene, slab), LARGE_DISTANCE)
    return DistanceField(origin, resolution, values)


@dataclass(frozen=True)
class QueryPointSet:
    """Surface sample points: link_index -1 means the base body."""

    link_index: np.ndarray  # (m,) int64
    offsets: np.ndarray  # (m, 3) in the owning body frame

    def __post_init__(self):
        li = np.ascontiguousarray(self.link_index, dtype=np.int64)
        off = np.ascontiguousarray(self.offsets, dtype=np.float64)
        if li.ndim != 1 or off.shape != (li.shape[0], 3) or li.shape[0] < 1:
            raise ValueError("malformed query point arrays")
        li.setflags(write=False)
        off.setflags(write=False)
        object.__setattr__(self, "link_index", li)
        object.__setattr__(self, "offsets", off)

    @property
    def n_points(self) -> int:
        return self.link_index.shape[0]


def link_bounding_boxes(chain: KinematicChain,
                        radius: float = LINK_RADIUS) -> list:
    """Per-link AABBs in each joint frame, inflated around the link offset."""
    boxes = []
    for link in chain.links:
        off = link.offset.position
        lo = np.minimum(off, 0.0) - radius
        hi = np.maximum(off, 0.0) + radius
        boxes.append(AxisBox(lo, hi))
    return boxes


def _largest_remainder(weights: np.ndarray, total: int) -> np.ndarray:
    """Integer allocation proportional to weights, summing exactly to total."""
    weights = np.asarray(weights, dtype=np.float64)
    share = weights / weights.sum() * total
    counts = np.floor(share).astype(int)
    rem = share - counts
    short = total - counts.sum()
    # ties: lower index wins via stable argsort on negated remainder
    order = np.argsort(-rem, kind="stable")
    counts[order[:short]] += 1
    return counts


def _sample_on_box(box: AxisBox, count: int, rng) -> np.ndarray:
    """Uniform-by-area samples on the surface of an axis-aligned box."""
    w, d, h = box.max_corner - box.min_corner
    face_areas = np.array([d * h, d * h, w * h, w * h, w * d, w * d])
    pts = np.empty((count, 3))
    faces = rng.choice(6, size=count, p=face_areas / face_areas.sum())
    u = rng.uniform(size=(count, 2))
    for j in range(count):
        f = faces[j]
        p = box.min_corner.copy()
        axis = f // 2
        if f % 2 == 1:
            p[axis] = box.max_corner[axis]
        others = [a for a in range(3) if a != axis]
        extent = box.max_corner - box.min_corner
        p[others[0]] += u[j, 0] * extent[others[0]]
        p[others[1]] += u[j, 1] * extent[others[1]]
        pts[j] = p
    return pts


def sample_query_points(chain: KinematicChain, base_geometry: AxisBox,
                        n_q: int = DEFAULT_N_QUERY_POINTS,
                        seed: int = 0) -> QueryPointSet:
    """Surface points on base + link bounding boxes, area-proportional."""
    if n_q < 1:
        raise ValueError("need at least one query point")
    boxes = [base_geometry] + link_bounding_boxes(chain)
    indices = [-1] + list(range(len(chain.links)))
    areas = np.array([b.surface_area() for b in boxes])
    counts = _largest_remainder(areas, n_q)
    rng = np.random.Generator(np.random.PCG64(seed))
    link_index = []
    offsets = []
    for box, idx, count in zip(boxes, indices, counts):
        if count == 0:
            continue
        pts = _sample_on_box(box, int(count), rng)
        link_index.extend([idx] * int(count))
        offsets.append(pts)
    return QueryPointSet(np.array(link_index, dtype=np.int64),
                         np.vstack(offsets))


def materialize_points(qps: QueryPointSet, state,
                       chain: KinematicChain) -> np.ndarray:
    """World-frame positions of every query point at one trajectory state."""
    joint_pos, joint_quat = joint_frames(chain, state.joints)
    base = state.base
    return kernels.materialize_state(joint_pos, joint_quat,
                                     base.x, base.y, base.yaw,
                                     qps.link_index, qps.offsets)
