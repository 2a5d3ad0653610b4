"""Planar geometry helpers shared across the pipeline.

All map-level processing is 2-D: positions are meters on a local map plane,
angles are radians measured counter-clockwise from the +x (east) axis and
canonicalized to the half-open interval [-pi, pi).
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

TAU = 2.0 * math.pi


def wrap_angle(angle):
    """Wrap an angle (scalar or array) to the canonical interval [-pi, pi).

    The interval is half-open at +pi so every angle has exactly one
    representative; +pi maps to -pi.
    """
    return (angle + math.pi) % TAU - math.pi


def bearing_of(delta_xy) -> float:
    """Bearing of a displacement vector, radians CCW from east, in [-pi, pi)."""
    return wrap_angle(math.atan2(float(delta_xy[1]), float(delta_xy[0])))


def angular_distance(a: float, b: float) -> float:
    """Absolute distance between two angles on the circle, in [0, pi]."""
    return abs(wrap_angle(a - b))


def equirect_column_shift(yaw_rad: float, width: int) -> int:
    """Column shift realizing a yaw rotation of an equirectangular image.

    Positive yaw (counter-clockwise camera rotation) moves content toward
    higher column indices. Ties at half a column round to even so that
    shifts for +yaw and -yaw cancel exactly.
    """
    return int(round(yaw_rad / TAU * width)) % width


class Rect(NamedTuple):
    """Axis-aligned rectangle in map meters (closed on all sides)."""

    min_x: float
    min_y: float
    max_x: float
    max_y: float

    def inflated(self, pad: float) -> "Rect":
        return Rect(self.min_x - pad, self.min_y - pad, self.max_x + pad, self.max_y + pad)

    def union(self, other: "Rect") -> "Rect":
        return Rect(
            min(self.min_x, other.min_x),
            min(self.min_y, other.min_y),
            max(self.max_x, other.max_x),
            max(self.max_y, other.max_y),
        )

    def contains(self, x: float, y: float) -> bool:
        return self.min_x <= x <= self.max_x and self.min_y <= y <= self.max_y


def rects_overlap(a: Rect, b: Rect) -> bool:
    """Whether two closed axis-aligned rectangles intersect (touching counts)."""
    return a.min_x <= b.max_x and b.min_x <= a.max_x and a.min_y <= b.max_y and b.min_y <= a.max_y


def bounds_of(points: np.ndarray) -> Rect:
    """Tight AABB of an (N, 2) point array."""
    if len(points) == 0:
        raise ValueError("cannot bound an empty point set")
    mins = points.min(axis=0)
    maxs = points.max(axis=0)
    return Rect(float(mins[0]), float(mins[1]), float(maxs[0]), float(maxs[1]))


def _segment_intersection(p0, p1, q0, q1):
    """Intersection point of segments [p0,p1] and [q0,q1], or None.

    Touching at endpoints counts as an intersection. Parallel (including
    collinear-overlap) pairs return None: overlap has no single crossing
    point and is handled by callers that care.
    """
    r = (p1[0] - p0[0], p1[1] - p0[1])
    s = (q1[0] - q0[0], q1[1] - q0[1])
    denom = r[0] * s[1] - r[1] * s[0]
    if denom == 0.0:
        return None
    dx = q0[0] - p0[0]
    dy = q0[1] - p0[1]
    t = (dx * s[1] - dy * s[0]) / denom
    u = (dx * r[1] - dy * r[0]) / denom
    if 0.0 <= t <= 1.0 and 0.0 <= u <= 1.0:
        return (p0[0] + t * r[0], p0[1] + t * r[1])
    return None


def polyline_crossing_points(poly_a: np.ndarray, poly_b: np.ndarray, merge_eps: float = 1e-6) -> list[tuple[float, float]]:
    """Distinct points where two polylines meet, by brute-force segment tests.

    Points closer than ``merge_eps`` are merged so a crossing that lands
    exactly on a shared vertex is counted once, not once per touching
    segment pair.
    """
    points: list[tuple[float, float]] = []
    a = np.asarray(poly_a, dtype=float)
    b = np.asarray(poly_b, dtype=float)
    # Prune with per-segment bounding boxes before the exact test.
    a_lo = np.minimum(a[:-1], a[1:])
    a_hi = np.maximum(a[:-1], a[1:])
    b_lo = np.minimum(b[:-1], b[1:])
    b_hi = np.maximum(b[:-1], b[1:])
    for i in range(len(a) - 1):
        mask = np.all(a_lo[i] <= b_hi, axis=1) & np.all(b_lo <= a_hi[i], axis=1)
        for j in np.nonzero(mask)[0]:
            pt = _segment_intersection(a[i], a[i + 1], b[j], b[j + 1])
            if pt is None:
                continue
            if all(math.hypot(pt[0] - q[0], pt[1] - q[1]) > merge_eps for q in points):
                points.append(pt)
    return points
