"""Scalar 3D primitives: vectors, axis-aligned boxes, segment tests.

Coordinates are meters, right-handed, +z up; the table surface is z = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Direction components below this magnitude are treated as axis-parallel.
_PARALLEL_EPS = 1e-12


@dataclass(frozen=True)
class Vec3:
    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        for c in (self.x, self.y, self.z):
            if not isinstance(c, (int, float)) or not math.isfinite(c):
                raise ValueError(f"non-finite vector component: {c!r}")

    @classmethod
    def from_seq(cls, seq) -> "Vec3":
        vals = list(seq)
        if len(vals) != 3:
            raise ValueError(f"expected 3 components, got {len(vals)}")
        return cls(float(vals[0]), float(vals[1]), float(vals[2]))

    def __add__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def scaled(self, s: float) -> "Vec3":
        return Vec3(self.x * s, self.y * s, self.z * s)

    def dot(self, other: "Vec3") -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def norm(self) -> float:
        return math.sqrt(self.dot(self))

    def distance_to(self, other: "Vec3") -> float:
        return (self - other).norm()

    def normalized(self) -> "Vec3":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return self.scaled(1.0 / n)

    def as_list(self) -> list[float]:
        return [self.x, self.y, self.z]


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned box given by center and strictly positive half extents."""

    center: Vec3
    half_extents: Vec3

    def __post_init__(self) -> None:
        h = self.half_extents
        if h.x <= 0.0 or h.y <= 0.0 or h.z <= 0.0:
            raise ValueError(f"half extents must be positive: {h}")

    @property
    def lo(self) -> Vec3:
        return self.center - self.half_extents

    @property
    def hi(self) -> Vec3:
        return self.center + self.half_extents

    def inflated(self, margin: float) -> "Aabb":
        h = self.half_extents
        return Aabb(self.center, Vec3(h.x + margin, h.y + margin, h.z + margin))

    def contains(self, p: Vec3) -> bool:
        lo, hi = self.lo, self.hi
        return (
            lo.x <= p.x <= hi.x
            and lo.y <= p.y <= hi.y
            and lo.z <= p.z <= hi.z
        )

    def distance_to_point(self, p: Vec3) -> float:
        lo, hi = self.lo, self.hi
        dx = max(lo.x - p.x, 0.0, p.x - hi.x)
        dy = max(lo.y - p.y, 0.0, p.y - hi.y)
        dz = max(lo.z - p.z, 0.0, p.z - hi.z)
        return math.sqrt(dx * dx + dy * dy + dz * dz)


def segment_intersects_aabb(a: Vec3, b: Vec3, box: Aabb) -> bool:
    """Slab test for the closed segment a..b against a closed box.

    Touching the boundary counts as intersecting.
    """
    lo, hi = box.lo, box.hi
    t_min, t_max = 0.0, 1.0
    for p0, d, lo_c, hi_c in (
        (a.x, b.x - a.x, lo.x, hi.x),
        (a.y, b.y - a.y, lo.y, hi.y),
        (a.z, b.z - a.z, lo.z, hi.z),
    ):
        if abs(d) < _PARALLEL_EPS:
            if p0 < lo_c or p0 > hi_c:
                return False
            continue
        t1 = (lo_c - p0) / d
        t2 = (hi_c - p0) / d
        if t1 > t2:
            t1, t2 = t2, t1
        t_min = max(t_min, t1)
        t_max = min(t_max, t2)
        if t_min > t_max:
            return False
    return True


def segment_aabb_min_distance(a: Vec3, b: Vec3, box: Aabb, samples: int = 17) -> float:
    """Approximate min distance from segment a..b to a box.

    Sampled, deterministic; used only to rank motion variations, never to
    decide feasibility.
    """
    if segment_intersects_aabb(a, b, box):
        return 0.0
    best = math.inf
    step = b - a
    for i in range(samples):
        t = i / (samples - 1)
        p = a + step.scaled(t)
        best = min(best, box.distance_to_point(p))
    return best
