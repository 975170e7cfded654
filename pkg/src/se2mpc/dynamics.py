"""Continuous-time system models and the closed-loop plant integrator.

The models evaluate xdot = f(x, u) on raw state vectors; angular state
derivatives are plain reals (tangent values). The RK4 plant integrator is used
only by the simulator, never inside the NLP.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .manifold import SE2_MASK, norm_angle

# RK4 sub-step cap for the simulation plant.
PLANT_MAX_SUBSTEP = 0.01


@dataclass(frozen=True)
class ControlBounds:
    """Box bounds on controls (set U) and control derivatives (set Udot)."""

    lower: np.ndarray
    upper: np.ndarray
    d_lower: np.ndarray
    d_upper: np.ndarray

    def __post_init__(self):
        for name in ("lower", "upper", "d_lower", "d_upper"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if np.any(self.lower > self.upper) or np.any(self.d_lower > self.d_upper):
            raise ValueError("control bounds must satisfy lower <= upper")


@dataclass(frozen=True)
class SystemModel:
    """Time-invariant system xdot = f(x, u) with manifold-tagged state dims.

    f_batch, when present, evaluates f on stacked rows: (M, p), (M, q) -> (M, p).
    """

    name: str
    state_dim: int
    control_dim: int
    angular: np.ndarray  # bool mask over state dims
    f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    f_batch: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    yaw_rate_channel: int | None = None  # control index that directly sets thetadot

    def with_euclidean_tags(self) -> "SystemModel":
        """Ablated copy treating every state dimension as Euclidean."""
        return SystemModel(
            name=self.name + "_euclidean",
            state_dim=self.state_dim,
            control_dim=self.control_dim,
            angular=np.zeros(self.state_dim, dtype=bool),
            f=self.f,
            f_batch=self.f_batch,
            yaw_rate_channel=self.yaw_rate_channel,
        )


@dataclass(frozen=True)
class BicycleParams:
    """Distances from the center of mass to front/rear axle."""

    l_f: float
    l_r: float

    def __post_init__(self):
        if self.l_f < 0 or self.l_r <= 0:
            raise ValueError("require l_f >= 0 and l_r > 0")


def diff_drive_f(x, u) -> np.ndarray:
    """Differential drive: u = (v, omega)."""
    theta = x[2]
    v = u[0]
    return np.array([v * math.cos(theta), v * math.sin(theta), u[1]])


def bicycle_beta(delta: float, params: BicycleParams) -> float:
    """Slip angle between velocity at the center of mass and the longitudinal axis."""
    if not abs(delta) < math.pi / 2:
        raise ValueError("steering angle must satisfy |delta| < pi/2")
    return math.atan(params.l_r / (params.l_f + params.l_r) * math.tan(delta))


def bicycle_f(x, u, params: BicycleParams) -> np.ndarray:
    """Kinematic bicycle: u = (v, delta)."""
    beta = bicycle_beta(u[1], params)
    theta = x[2]
    v = u[0]
    return np.array(
        [
            v * math.cos(theta + beta),
            v * math.sin(theta + beta),
            v / params.l_r * math.sin(beta),
        ]
    )


def diff_drive_f_batch(X, U) -> np.ndarray:
    """Row-stacked differential-drive dynamics: (M, 3), (M, 2) -> (M, 3)."""
    theta = X[:, 2]
    v = U[:, 0]
    return np.stack([v * np.cos(theta), v * np.sin(theta), U[:, 1]], axis=1)


def diff_drive_model() -> SystemModel:
    return SystemModel(
        "diff_drive", 3, 2, SE2_MASK.copy(), diff_drive_f, diff_drive_f_batch,
        yaw_rate_channel=1,
    )


def bicycle_f_batch(X, U, params: BicycleParams) -> np.ndarray:
    """Row-stacked kinematic-bicycle dynamics: (M, 3), (M, 2) -> (M, 3)."""
    beta = np.arctan(params.l_r / (params.l_f + params.l_r) * np.tan(U[:, 1]))
    theta = X[:, 2]
    v = U[:, 0]
    return np.stack(
        [
            v * np.cos(theta + beta),
            v * np.sin(theta + beta),
            v / params.l_r * np.sin(beta),
        ],
        axis=1,
    )


def bicycle_model(params: BicycleParams) -> SystemModel:
    def f(x, u, _p=params):
        return bicycle_f(x, u, _p)

    def fb(X, U, _p=params):
        return bicycle_f_batch(X, U, _p)

    return SystemModel("bicycle", 3, 2, SE2_MASK.copy(), f, fb)


MODEL_REGISTRY = {
    "diff_drive": lambda params: diff_drive_model(),
    "bicycle": lambda params: bicycle_model(BicycleParams(**params)),
}


def make_model(name: str, params: dict | None = None) -> SystemModel:
    if name not in MODEL_REGISTRY:
        raise KeyError(f"unknown system model '{name}'")
    return MODEL_REGISTRY[name](params or {})


def plant_integrate(model: SystemModel, x0, u, dt: float) -> np.ndarray:
    """RK4 integration of the plant with zero-order-held control.

    Sub-steps are capped at PLANT_MAX_SUBSTEP; angular dims are normalized at
    the end only.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = np.asarray(x0, dtype=float).copy()
    u = np.asarray(u, dtype=float)
    n = max(1, int(math.ceil(dt / PLANT_MAX_SUBSTEP)))
    h = dt / n
    f = model.f
    for _ in range(n):
        k1 = f(x, u)
        k2 = f(x + 0.5 * h * k1, u)
        k3 = f(x + 0.5 * h * k2, u)
        k4 = f(x + h * k3, u)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(x)):
        raise FloatingPointError("plant integration produced non-finite state")
    if model.angular.any():
        x[model.angular] = norm_angle(x[model.angular])
    return x
