"""Collision models, obstacles and closed-form minimum distances.

Every supported shape pair (disc/point, stadium/segment, stadium/stadium, ...)
reduces to a segment-segment distance minus the summed radii; a point is a
degenerate segment and a disc a degenerate stadium.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def dist_point_segment(p, a, b) -> float:
    """Euclidean distance from point p to segment ab (a == b allowed)."""
    px, py = p[0], p[1]
    ax, ay = a[0], a[1]
    dx, dy = b[0] - ax, b[1] - ay
    den = dx * dx + dy * dy
    if den == 0.0:
        return math.hypot(px - ax, py - ay)
    t = ((px - ax) * dx + (py - ay) * dy) / den
    t = 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def _segments_intersect(a1, b1, a2, b2) -> bool:
    def orient(p, q, r):
        return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])

    d1 = orient(a2, b2, a1)
    d2 = orient(a2, b2, b1)
    d3 = orient(a1, b1, a2)
    d4 = orient(a1, b1, b2)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and (
        (d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)
    ):
        return True
    return False


def dist_segment_segment(a1, b1, a2, b2) -> float:
    """Minimum distance between segments a1b1 and a2b2; zero if they intersect."""
    if _segments_intersect(a1, b1, a2, b2):
        return 0.0
    return min(
        dist_point_segment(a1, a2, b2),
        dist_point_segment(b1, a2, b2),
        dist_point_segment(a2, a1, b1),
        dist_point_segment(b2, a1, b1),
    )


def _orient_rows(P, Q, R):
    return (Q[:, 0] - P[:, 0]) * (R[:, 1] - P[:, 1]) - (Q[:, 1] - P[:, 1]) * (
        R[:, 0] - P[:, 0]
    )


def dist_point_segment_rows(P, A, B):
    """Row-wise dist_point_segment on (M, 2) arrays."""
    D = B - A
    den = np.einsum("mi,mi->m", D, D)
    safe = np.where(den == 0.0, 1.0, den)
    t = np.einsum("mi,mi->m", P - A, D) / safe
    t = np.clip(np.where(den == 0.0, 0.0, t), 0.0, 1.0)
    C = A + t[:, None] * D
    return np.hypot(P[:, 0] - C[:, 0], P[:, 1] - C[:, 1])


def dist_segment_segment_rows(A1, B1, A2, B2):
    """Row-wise dist_segment_segment on (M, 2) arrays."""
    d1 = _orient_rows(A2, B2, A1)
    d2 = _orient_rows(A2, B2, B1)
    d3 = _orient_rows(A1, B1, A2)
    d4 = _orient_rows(A1, B1, B2)
    inter = (((d1 > 0) & (d2 < 0)) | ((d1 < 0) & (d2 > 0))) & (
        ((d3 > 0) & (d4 < 0)) | ((d3 < 0) & (d4 > 0))
    )
    d = np.minimum.reduce(
        [
            dist_point_segment_rows(A1, A2, B2),
            dist_point_segment_rows(B1, A2, B2),
            dist_point_segment_rows(A2, A1, B1),
            dist_point_segment_rows(B2, A1, B1),
        ]
    )
    return np.where(inter, 0.0, d)


@dataclass(frozen=True)
class Disc:
    """Circular footprint centered on (x, y); orientation-independent."""

    radius: float

    def axis(self, x) -> tuple:
        p = (x[0], x[1])
        return p, p


@dataclass(frozen=True)
class Stadium:
    """Pill footprint: a segment along the heading, swept by a disc.

    The axis runs from -rear_offset to +(length - rear_offset) along theta,
    measured from the pose position.
    """

    rear_offset: float
    length: float
    radius: float

    def axis(self, x) -> tuple:
        c, s = math.cos(x[2]), math.sin(x[2])
        a = (x[0] - self.rear_offset * c, x[1] - self.rear_offset * s)
        fwd = self.length - self.rear_offset
        b = (x[0] + fwd * c, x[1] + fwd * s)
        return a, b


Footprint = Disc | Stadium


@dataclass(frozen=True)
class PointObstacle:
    p: tuple

    radius: float = 0.0

    def segment(self, t: float) -> tuple:
        return tuple(self.p), tuple(self.p)


@dataclass(frozen=True)
class SegmentObstacle:
    a: tuple
    b: tuple

    radius: float = 0.0

    def segment(self, t: float) -> tuple:
        return tuple(self.a), tuple(self.b)


@dataclass(frozen=True)
class MovingStadiumObstacle:
    """Stadium translating along +x at constant speed; origin is the axis start at t=0."""

    origin: tuple
    length: float
    radius: float
    velocity: float

    def segment(self, t: float) -> tuple:
        x0 = self.origin[0] + self.velocity * t
        y0 = self.origin[1]
        return (x0, y0), (x0 + self.length, y0)


Obstacle = PointObstacle | SegmentObstacle | MovingStadiumObstacle


@dataclass(frozen=True)
class SeparationSpec:
    d_min: float = 0.0

    def __post_init__(self):
        if self.d_min < 0:
            raise ValueError("d_min must be >= 0")


def signed_clearance(fp: Footprint, x, obs: Obstacle, t: float) -> float:
    """Surface-to-surface distance, negative on penetration.

    Used by obstacle constraint edges so gradients survive penetration.
    """
    a1, b1 = fp.axis(x)
    a2, b2 = obs.segment(t)
    return dist_segment_segment(a1, b1, a2, b2) - fp.radius - obs.radius


def axis_rows(fp: Footprint, X):
    """Footprint axis endpoints for stacked poses X (M, >=3) -> (A, B) each (M, 2)."""
    if isinstance(fp, Disc):
        P = X[:, :2]
        return P, P
    c, s = np.cos(X[:, 2]), np.sin(X[:, 2])
    d = np.stack([c, s], axis=1)
    A = X[:, :2] - fp.rear_offset * d
    B = X[:, :2] + (fp.length - fp.rear_offset) * d
    return A, B


def segment_rows(obs: Obstacle, T):
    """Obstacle segment endpoints at stacked times T (M,) -> (A, B) each (M, 2)."""
    T = np.asarray(T, dtype=float)
    M = T.size
    if isinstance(obs, MovingStadiumObstacle):
        A = np.stack([obs.origin[0] + obs.velocity * T, np.full(M, obs.origin[1])], axis=1)
        return A, A + np.array([obs.length, 0.0])
    a, b = obs.segment(0.0)
    return (
        np.broadcast_to(np.asarray(a, dtype=float), (M, 2)),
        np.broadcast_to(np.asarray(b, dtype=float), (M, 2)),
    )


def signed_clearance_rows(fp: Footprint, X, obs: Obstacle, T):
    """Row-wise signed_clearance for stacked poses X and times T."""
    A1, B1 = axis_rows(fp, X)
    A2, B2 = segment_rows(obs, T)
    return dist_segment_segment_rows(A1, B1, A2, B2) - fp.radius - obs.radius


def min_distance(fp: Footprint, x, obs: Obstacle, t: float = 0.0) -> float:
    """Minimum distance between footprint occupancy at pose x and obstacle at time t.

    Clamped below at zero (sets intersect).
    """
    return max(0.0, signed_clearance(fp, x, obs, t))


def in_collision_free_set(fp, x, obstacles, t, spec: SeparationSpec):
    """True iff every obstacle's signed clearance >= d_min; returns the clearances.

    Clearances are signed (negative on penetration) so d_min = 0 still
    distinguishes contact from free space.
    """
    dists = [signed_clearance(fp, x, obs, t) for obs in obstacles]
    ok = all(d >= spec.d_min for d in dists)
    return ok, dists


def associate_obstacles(states, obstacles, cutoff: float, k_max: int, fp, times=None):
    """Per-state indices of the <= k_max nearest obstacles within cutoff."""
    if cutoff <= 0 or k_max < 1:
        raise ValueError("require cutoff > 0 and k_max >= 1")
    if times is None:
        times = [0.0] * len(states)
    result = []
    for x, t in zip(states, times):
        pairs = []
        for i, obs in enumerate(obstacles):
            d = min_distance(fp, x, obs, t)
            if d <= cutoff:
                pairs.append((d, i))
        pairs.sort()
        result.append([i for _, i in pairs[:k_max]])
    return result
