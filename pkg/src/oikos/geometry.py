"""Poses, bounding boxes, ray casting and overlap queries.

All coordinates are right-handed, z up, SI meters. Quaternions are stored
``(w, x, y, z)`` and must be unit length. Only two collision shapes exist:
axis-aligned boxes given by half extents (oriented by the owning pose) and
convex hulls of up to 64 vertices. These primitives are deliberately exact
and branch-stable: the kernel's replay guarantees rest on every call here
being bit-reproducible for identical inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

Vec3 = tuple[float, float, float]
Quat = tuple[float, float, float, float]

_TINY = 1e-12

# --- vector helpers ----------------------------------------------------------


def v_add(a: Vec3, b: Vec3) -> Vec3:
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2])


def v_sub(a: Vec3, b: Vec3) -> Vec3:
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def v_scale(a: Vec3, s: float) -> Vec3:
    return (a[0] * s, a[1] * s, a[2] * s)


def v_dot(a: Vec3, b: Vec3) -> float:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def v_cross(a: Vec3, b: Vec3) -> Vec3:
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def v_norm(a: Vec3) -> float:
    return math.sqrt(v_dot(a, a))


def v_normalize(a: Vec3) -> Vec3:
    n = v_norm(a)
    if n < _TINY:
        raise ValueError("cannot normalize near-zero vector")
    return (a[0] / n, a[1] / n, a[2] / n)


def v_dist(a: Vec3, b: Vec3) -> float:
    return v_norm(v_sub(a, b))


# --- quaternion helpers --------------------------------------------------------


def quat_mul(a: Quat, b: Quat) -> Quat:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return (
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    )


def quat_conj(q: Quat) -> Quat:
    return (q[0], -q[1], -q[2], -q[3])


def quat_normalize(q: Quat) -> Quat:
    n = math.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    if n < _TINY:
        raise ValueError("cannot normalize near-zero quaternion")
    return (q[0] / n, q[1] / n, q[2] / n, q[3] / n)


def quat_rotate(q: Quat, v: Vec3) -> Vec3:
    # v' = v + 2*w*(u x v) + 2*(u x (u x v)) with u the vector part.
    u = (q[1], q[2], q[3])
    t = v_cross(u, v)
    t = (t[0] * 2.0, t[1] * 2.0, t[2] * 2.0)
    return v_add(v_add(v, v_scale(t, q[0])), v_cross(u, t))


def quat_from_axis_angle(axis: Vec3, angle: float) -> Quat:
    ax = v_normalize(axis)
    half = angle * 0.5
    s = math.sin(half)
    return (math.cos(half), ax[0] * s, ax[1] * s, ax[2] * s)


IDENTITY_QUAT: Quat = (1.0, 0.0, 0.0, 0.0)


# --- pose ---------------------------------------------------------------------


@dataclass(frozen=True)
class Pose:
    """Rigid transform: rotate by ``orn`` then translate by ``pos``."""

    pos: Vec3
    orn: Quat = IDENTITY_QUAT

    def __post_init__(self):
        n = math.sqrt(sum(c * c for c in self.orn))
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"quaternion not unit length (norm {n!r})")

    def transform_point(self, p: Vec3) -> Vec3:
        return v_add(quat_rotate(self.orn, p), self.pos)

    def inverse_transform_point(self, p: Vec3) -> Vec3:
        return quat_rotate(quat_conj(self.orn), v_sub(p, self.pos))

    def compose(self, other: "Pose") -> "Pose":
        """This pose applied after ``other`` (``self * other``)."""
        return Pose(
            self.transform_point(other.pos),
            quat_normalize(quat_mul(self.orn, other.orn)),
        )

    def inverse(self) -> "Pose":
        inv = quat_conj(self.orn)
        return Pose(quat_rotate(inv, v_scale(self.pos, -1.0)), inv)


IDENTITY_POSE = Pose((0.0, 0.0, 0.0))


# --- shapes ---------------------------------------------------------------------


@dataclass(frozen=True)
class Box:
    """Box centered at the link origin with the given half extents."""

    half_extents: Vec3

    def __post_init__(self):
        if min(self.half_extents) <= 0.0:
            raise ValueError("box half extents must be positive")

    def corners(self) -> list[Vec3]:
        hx, hy, hz = self.half_extents
        return [
            (sx * hx, sy * hy, sz * hz)
            for sx in (-1.0, 1.0)
            for sy in (-1.0, 1.0)
            for sz in (-1.0, 1.0)
        ]


class ConvexHull:
    """Convex hull of up to 64 vertices; face planes come from qhull."""

    __slots__ = ("vertices", "_planes")

    MAX_VERTICES = 64

    def __init__(self, vertices: Sequence[Vec3]):
        if len(vertices) < 4:
            raise ValueError("convex hull needs at least 4 vertices")
        if len(vertices) > self.MAX_VERTICES:
            raise ValueError(f"convex hull limited to {self.MAX_VERTICES} vertices")
        self.vertices: tuple[Vec3, ...] = tuple(tuple(map(float, v)) for v in vertices)
        self._planes: Optional[list[tuple[Vec3, float]]] = None

    def planes(self) -> list[tuple[Vec3, float]]:
        """Outward face planes as (unit normal n, rhs) with interior n.x <= rhs."""
        if self._planes is None:
            from scipy.spatial import ConvexHull as QHull

            hull = QHull(self.vertices)
            planes = []
            for eq in hull.equations:
                n = (float(eq[0]), float(eq[1]), float(eq[2]))
                planes.append((n, -float(eq[3])))
            self._planes = planes
        return self._planes

    def __eq__(self, other):
        return isinstance(other, ConvexHull) and self.vertices == other.vertices

    def __hash__(self):
        return hash(self.vertices)


Shape = "Box | ConvexHull"


# --- AABB -----------------------------------------------------------------------


@dataclass(frozen=True)
class Aabb:
    min: Vec3
    max: Vec3

    def __post_init__(self):
        if any(self.min[i] > self.max[i] for i in range(3)):
            raise ValueError(f"inverted AABB {self.min} .. {self.max}")

    def center(self) -> Vec3:
        return (
            (self.min[0] + self.max[0]) * 0.5,
            (self.min[1] + self.max[1]) * 0.5,
            (self.min[2] + self.max[2]) * 0.5,
        )

    def extents(self) -> Vec3:
        return (
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        )

    def diagonal(self) -> float:
        return v_norm(self.extents())

    def union(self, other: "Aabb") -> "Aabb":
        return Aabb(
            (
                min(self.min[0], other.min[0]),
                min(self.min[1], other.min[1]),
                min(self.min[2], other.min[2]),
            ),
            (
                max(self.max[0], other.max[0]),
                max(self.max[1], other.max[1]),
                max(self.max[2], other.max[2]),
            ),
        )

    def contains_point(self, p: Vec3, slack: float = 0.0) -> bool:
        return all(self.min[i] - slack <= p[i] <= self.max[i] + slack for i in range(3))

    def distance_to_point(self, p: Vec3) -> float:
        dx = max(self.min[0] - p[0], 0.0, p[0] - self.max[0])
        dy = max(self.min[1] - p[1], 0.0, p[1] - self.max[1])
        dz = max(self.min[2] - p[2], 0.0, p[2] - self.max[2])
        return math.sqrt(dx * dx + dy * dy + dz * dz)

    def distance_to_aabb(self, other: "Aabb") -> float:
        dx = max(self.min[0] - other.max[0], 0.0, other.min[0] - self.max[0])
        dy = max(self.min[1] - other.max[1], 0.0, other.min[1] - self.max[1])
        dz = max(self.min[2] - other.max[2], 0.0, other.min[2] - self.max[2])
        return math.sqrt(dx * dx + dy * dy + dz * dz)


def aabb_of_points(points: Iterable[Vec3]) -> Aabb:
    xs, ys, zs = zip(*points)
    return Aabb((min(xs), min(ys), min(zs)), (max(xs), max(ys), max(zs)))


def world_aabb(shape, pose: Pose) -> Aabb:
    """Exact world-frame AABB of a posed shape.

    Boxes transform their 8 corners; hulls transform every vertex. Both are
    exact (the AABB of a convex shape is the AABB of its vertices).
    """
    if isinstance(shape, Box):
        pts = shape.corners()
    elif isinstance(shape, ConvexHull):
        pts = shape.vertices
    else:
        raise TypeError(f"unsupported shape {type(shape).__name__}")
    return aabb_of_points(pose.transform_point(p) for p in pts)


# --- overlap --------------------------------------------------------------------

DISJOINT = "disjoint"
TOUCHING = "touching"
PENETRATING = "penetrating"


@dataclass(frozen=True)
class OverlapResult:
    kind: str
    depth: float = 0.0


def overlap(a: Aabb, b: Aabb, eps: float = 1e-4) -> OverlapResult:
    """Classify two AABBs as disjoint, touching (within eps) or penetrating.

    ``depth`` for penetration is the minimum translation distance: the
    smallest per-axis overlap.
    """
    min_overlap = math.inf
    for i in range(3):
        o = min(a.max[i], b.max[i]) - max(a.min[i], b.min[i])
        if o < min_overlap:
            min_overlap = o
    if min_overlap < -eps:
        return OverlapResult(DISJOINT)
    if min_overlap <= eps:
        return OverlapResult(TOUCHING)
    return OverlapResult(PENETRATING, min_overlap)


# --- rays -----------------------------------------------------------------------


@dataclass(frozen=True)
class Ray:
    origin: Vec3
    direction: Vec3
    max_dist: float

    def __post_init__(self):
        if abs(v_norm(self.direction) - 1.0) > 1e-9:
            raise ValueError("ray direction must be unit length")
        if self.max_dist <= 0.0:
            raise ValueError("ray max_dist must be positive")


@dataclass(frozen=True)
class Hit:
    object_id: str
    link_id: str
    distance: float
    point: Vec3
    normal: Vec3


def _ray_box_local(origin: Vec3, direction: Vec3, half: Vec3):
    """Slab interval of a local-frame ray against a centered box.

    Returns (t_near, t_far, axis_near, axis_far, sign_near, sign_far) or None.
    """
    t_near, t_far = -math.inf, math.inf
    axis_near = axis_far = -1
    sign_near = sign_far = 1.0
    for i in range(3):
        o, d, h = origin[i], direction[i], half[i]
        if abs(d) < _TINY:
            if o < -h or o > h:
                return None
            continue
        inv = 1.0 / d
        t1 = (-h - o) * inv
        t2 = (h - o) * inv
        s1, s2 = -1.0, 1.0
        if t1 > t2:
            t1, t2 = t2, t1
            s1, s2 = s2, s1
        if t1 > t_near:
            t_near, axis_near, sign_near = t1, i, s1
        if t2 < t_far:
            t_far, axis_far, sign_far = t2, i, s2
    if t_near > t_far:
        return None
    return t_near, t_far, axis_near, axis_far, sign_near, sign_far


def _ray_hull_local(origin: Vec3, direction: Vec3, hull: ConvexHull):
    """Plane-clipping interval of a local-frame ray against a convex hull."""
    t_near, t_far = -math.inf, math.inf
    n_near: Optional[Vec3] = None
    n_far: Optional[Vec3] = None
    for n, rhs in hull.planes():
        denom = v_dot(n, direction)
        dist = v_dot(n, origin) - rhs
        if abs(denom) < _TINY:
            if dist > 1e-9:
                return None
            continue
        t = -dist / denom
        if denom < 0.0:
            if t > t_near:
                t_near, n_near = t, n
        else:
            if t < t_far:
                t_far, n_far = t, n
    if t_near > t_far:
        return None
    return t_near, t_far, n_near, n_far


def ray_shape_hit(shape, pose: Pose, ray: Ray):
    """First intersection of ``ray`` with a posed shape.

    Returns ``(distance, world_point, world_normal)`` or ``None``. A ray that
    starts inside the shape reports the exit intersection; one that starts
    past the shape reports nothing. Distances beyond ``ray.max_dist`` are
    discarded.
    """
    inv = quat_conj(pose.orn)
    o_local = quat_rotate(inv, v_sub(ray.origin, pose.pos))
    d_local = quat_rotate(inv, ray.direction)

    if isinstance(shape, Box):
        res = _ray_box_local(o_local, d_local, shape.half_extents)
        if res is None:
            return None
        t_near, t_far, ax_n, ax_f, sg_n, sg_f = res
        if t_near >= 0.0:
            t, axis, sign = t_near, ax_n, sg_n
        elif t_far >= 0.0:
            t, axis, sign = t_far, ax_f, sg_f
        else:
            return None
        if t > ray.max_dist or axis < 0:
            return None
        local_n = [0.0, 0.0, 0.0]
        local_n[axis] = sign
        normal = quat_rotate(pose.orn, (local_n[0], local_n[1], local_n[2]))
    elif isinstance(shape, ConvexHull):
        res = _ray_hull_local(o_local, d_local, shape)
        if res is None:
            return None
        t_near, t_far, n_near, n_far = res
        if t_near >= 0.0:
            t, local_normal = t_near, n_near
        elif t_far >= 0.0:
            t, local_normal = t_far, n_far
        else:
            return None
        if t > ray.max_dist or local_normal is None:
            return None
        normal = quat_rotate(pose.orn, local_normal)
    else:
        raise TypeError(f"unsupported shape {type(shape).__name__}")

    point = v_add(ray.origin, v_scale(ray.direction, t))
    return t, point, normal


def ray_hits(shapes, ray: Ray) -> list[Hit]:
    """All intersections of ``ray`` with ``(object_id, link_id, shape, pose)``
    entries, sorted by distance (ties broken by ids for determinism)."""
    hits = []
    for object_id, link_id, shape, pose in shapes:
        res = ray_shape_hit(shape, pose, ray)
        if res is not None:
            t, point, normal = res
            hits.append(Hit(object_id, link_id, t, point, normal))
    hits.sort(key=lambda h: (h.distance, h.object_id, h.link_id))
    return hits


# --- swept AABB -------------------------------------------------------------------


def sweep_max_fraction(moving: Aabb, delta: Vec3, obstacles: Iterable[Aabb],
                       eps: float = 1e-4) -> float:
    """Largest fraction of ``delta`` the box can travel without penetrating
    any obstacle deeper than ``eps``.

    Solved per axis in closed form: penetration exceeds eps exactly while
    ``t * delta`` lies inside the obstacle's interval shrunk by eps.
    """
    allowed = 1.0
    for obs in obstacles:
        t_enter, t_exit = -math.inf, math.inf
        separated = False
        for i in range(3):
            lo = obs.min[i] + eps - moving.max[i]
            hi = obs.max[i] - eps - moving.min[i]
            d = delta[i]
            if abs(d) < _TINY:
                if not (lo < 0.0 < hi):
                    separated = True
                    break
                continue
            t1, t2 = lo / d, hi / d
            if t1 > t2:
                t1, t2 = t2, t1
            t_enter = max(t_enter, t1)
            t_exit = min(t_exit, t2)
        if separated or t_enter >= t_exit or t_exit <= 0.0 or t_enter >= allowed:
            continue
        allowed = max(0.0, t_enter)
    return allowed


# --- polygons (room floors) ---------------------------------------------------------

Vec2 = tuple[float, float]


def point_in_polygon(p: Vec2, polygon: Sequence[Vec2], edge_tol: float = 1e-9) -> bool:
    """Even-odd containment test; points on an edge count as inside."""
    x, y = p
    n = len(polygon)
    inside = False
    for i in range(n):
        x1, y1 = polygon[i]
        x2, y2 = polygon[(i + 1) % n]
        # Boundary check: distance from p to the segment.
        ex, ey = x2 - x1, y2 - y1
        seg_len2 = ex * ex + ey * ey
        if seg_len2 > 0.0:
            t = max(0.0, min(1.0, ((x - x1) * ex + (y - y1) * ey) / seg_len2))
            cx, cy = x1 + t * ex, y1 + t * ey
            if (x - cx) ** 2 + (y - cy) ** 2 <= edge_tol * edge_tol:
                return True
        if (y1 > y) != (y2 > y):
            x_cross = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < x_cross:
                inside = not inside
    return inside


def polygon_bounds(polygon: Sequence[Vec2]) -> tuple[Vec2, Vec2]:
    xs = [p[0] for p in polygon]
    ys = [p[1] for p in polygon]
    return (min(xs), min(ys)), (max(xs), max(ys))
