"""Nonlinear increment/difference operators for Euclidean, SO(2) and SE(2) spaces.

Increments live in the local Euclidean tangent space; applying one to a state
wraps angular components back into [-pi, pi). All functions are pure and safe
for concurrent use.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

TWO_PI = 2.0 * np.pi


class ManifoldTag(Enum):
    EUCLIDEAN = "euclidean"
    ANGULAR = "angular"


def tags_to_mask(tags) -> np.ndarray:
    """Convert a sequence of ManifoldTag (or an existing bool mask) to a bool mask."""
    if isinstance(tags, np.ndarray) and tags.dtype == bool:
        return tags
    return np.array([t == ManifoldTag.ANGULAR for t in tags], dtype=bool)


def _wrap(phi):
    """Wrap to [-pi, pi) without finite-value checks (solver hot path)."""
    return np.mod(phi + np.pi, TWO_PI) - np.pi


def norm_angle(phi):
    """Normalize an angle (or array of angles) to [-pi, pi).

    Raises ValueError on non-finite input.
    """
    phi = np.asarray(phi, dtype=float)
    if not np.all(np.isfinite(phi)):
        raise ValueError("norm_angle requires finite input")
    out = np.mod(phi + np.pi, TWO_PI) - np.pi
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class SE2State:
    """Pose (x, y, theta) with theta kept in [-pi, pi)."""

    x: float
    y: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", norm_angle(self.theta))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta], dtype=float)

    @staticmethod
    def from_array(a) -> "SE2State":
        return SE2State(float(a[0]), float(a[1]), float(a[2]))


@dataclass(frozen=True)
class StateIncrement:
    """Local tangent-space increment; dtheta is an unnormalized real."""

    dx: float
    dy: float
    dtheta: float

    def as_array(self) -> np.ndarray:
        return np.array([self.dx, self.dy, self.dtheta], dtype=float)


# Tag mask for SE(2): (x, y) Euclidean, theta angular.
SE2_TAGS = (ManifoldTag.EUCLIDEAN, ManifoldTag.EUCLIDEAN, ManifoldTag.ANGULAR)
SE2_MASK = tags_to_mask(SE2_TAGS)


def boxplus(x: SE2State, d: StateIncrement) -> SE2State:
    """x boxplus d: add translation, add-and-normalize rotation."""
    return SE2State(x.x + d.dx, x.y + d.dy, norm_angle(x.theta + d.dtheta))


def boxminus(x2: SE2State, x1: SE2State) -> StateIncrement:
    """x2 boxminus x1: translation difference plus shortest signed angular distance."""
    return StateIncrement(x2.x - x1.x, x2.y - x1.y, norm_angle(x2.theta - x1.theta))


def generic_boxplus(values, increment, tags) -> np.ndarray:
    """Per-dimension increment; angular dimensions are wrapped to [-pi, pi)."""
    values = np.asarray(values, dtype=float)
    increment = np.asarray(increment, dtype=float)
    if values.shape != increment.shape:
        raise ValueError(
            f"generic_boxplus length mismatch: {values.shape} vs {increment.shape}"
        )
    mask = tags_to_mask(tags)
    out = values + increment
    if mask.any():
        out[mask] = _wrap(out[mask])
    return out


def generic_boxminus(v2, v1, tags) -> np.ndarray:
    """Per-dimension difference; angular dimensions give the shortest signed distance."""
    v2 = np.asarray(v2, dtype=float)
    v1 = np.asarray(v1, dtype=float)
    mask = tags_to_mask(tags)
    out = v2 - v1
    if mask.any():
        out[mask] = _wrap(out[mask])
    return out


def interpolate(v0, v1, alpha: float, tags) -> np.ndarray:
    """Interpolate between two tagged vectors; angular dims follow the shortest arc."""
    v0 = np.asarray(v0, dtype=float)
    d = generic_boxminus(v1, v0, tags)
    return generic_boxplus(v0, alpha * d, tags)
