"""MPC realizations: receding-horizon quadratic form and shrinking-horizon
time-optimal control with online grid adaptation.

A controller owns its warm-start trajectory and previous-control bookkeeping;
the closed-loop harness in `simulation` drives it at a fixed rate and applies
the first optimal control of each solve.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import MovingStadiumObstacle, associate_obstacles
from .manifold import generic_boxminus
from .solver import (
    ShiftPolicy,
    SolverConfig,
    SolverResult,
    SolverStatus,
    resample_grid,
    solve,
    warm_start,
)
from .transcription import (
    GridMode,
    TrajectoryGrid,
    assemble_nlp,
    extract_grid,
    initialize_guess,
)

FALLBACK_DECAY = 0.5  # per-step decay of the last control after a failed solve

# Warm solves inherit the penalty level reached previously: restarting at the
# cold value lets a time-optimal objective wreck a feasible warm start before
# the penalty catches up again. The cap keeps the merit well enough
# conditioned that the short warm budget can still move the plan.
WARM_RHO_CAP = 1e5


def _check_psd(M, name):
    w = np.linalg.eigvalsh(np.atleast_2d(np.asarray(M, dtype=float)))
    if np.any(w < -1e-10):
        raise ValueError(f"{name} must be positive semidefinite")


@dataclass
class QuadraticFormConfig:
    """Receding-horizon quadratic-form MPC on a fixed grid resolution."""

    Q: np.ndarray
    Q_f: np.ndarray
    R: np.ndarray
    N: int
    dt_s: float
    x_f: np.ndarray
    terminal: str = "free"  # "free" or "pinned"

    def __post_init__(self):
        self.Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        self.Q_f = np.atleast_2d(np.asarray(self.Q_f, dtype=float))
        self.R = np.atleast_2d(np.asarray(self.R, dtype=float))
        self.x_f = np.asarray(self.x_f, dtype=float)
        _check_psd(self.Q, "Q")
        _check_psd(self.Q_f, "Q_f")
        _check_psd(self.R, "R")
        if self.dt_s <= 0:
            raise ValueError("dt_s must be positive")
        if self.terminal not in ("free", "pinned"):
            raise ValueError("terminal must be 'free' or 'pinned'")


@dataclass
class TimeOptimalConfig:
    """Shrinking-horizon (quasi-)time-optimal MPC with grid adaptation."""

    N_init: int
    dt_s: float
    dt_eps: float
    x_f: np.ndarray
    N_min: int = 2
    dt_min: float = 1e-3
    dt_max: float = math.inf
    R_hybrid: np.ndarray = field(default_factory=lambda: np.zeros((2, 2)))
    dt_init: Optional[float] = None  # initial-guess interval; defaults to dt_s
    # Carry the penalty level of the previous solve into the next warm solve.
    # Helps short-horizon tasks whose plan only shrinks toward the terminal
    # state (a cold penalty restart can destroy a feasible warm start), but
    # hurts maneuvering among obstacles, where a high carried penalty keeps
    # the solver from reshaping the plan.
    carry_penalty: bool = False

    def __post_init__(self):
        self.x_f = np.asarray(self.x_f, dtype=float)
        self.R_hybrid = np.atleast_2d(np.asarray(self.R_hybrid, dtype=float))
        if self.dt_eps <= 0 or self.dt_min <= 0:
            raise ValueError("dt_eps and dt_min must be positive")
        if self.N_min < 2 or self.N_init < self.N_min:
            raise ValueError("require N_init >= N_min >= 2")


@dataclass
class GoalTolerance:
    position: float = 0.1
    angle: float = 0.05


@dataclass
class ControllerState:
    N_n: int
    u_p: np.ndarray
    dt_p: float
    grid: Optional[TrajectoryGrid] = None
    x_f: Optional[np.ndarray] = None
    rho: Optional[float] = None  # penalty level reached by the previous solve


@dataclass
class StepDiagnostics:
    status: str  # "ok", "finished", "fallback"
    solver_status: Optional[SolverStatus]
    cost: float
    solve_time: float
    tf_star: float
    N: int
    dt_star: float
    max_violation: float = math.nan


def grid_adapt(N_n: int, dt_star: float, config: TimeOptimalConfig) -> int:
    """Hysteresis rule tracking the reference resolution; changes N by at most 1."""
    if dt_star <= 0 or N_n < config.N_min:
        raise ValueError("invalid grid-adaptation input")
    if dt_star > config.dt_s + config.dt_eps:
        return N_n + 1
    if dt_star < config.dt_s - config.dt_eps:
        return max(N_n - 1, config.N_min)
    return N_n


def quadratic_cost_terms(x_k, u_k, x_f, Q, R, tags) -> float:
    """Running cost: manifold-aware state quadratic form plus control effort."""
    d = generic_boxminus(x_k, x_f, tags)
    u_k = np.asarray(u_k, dtype=float)
    return float(d @ np.atleast_2d(Q) @ d + u_k @ np.atleast_2d(R) @ u_k)


def terminal_cost(x_N, x_f, Q_f, tags) -> float:
    d = generic_boxminus(x_N, x_f, tags)
    return float(d @ np.atleast_2d(Q_f) @ d)


def _max_workers() -> int:
    env = os.environ.get("MPC_PLANNER_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


class _BaseMpc:
    # default (max_outer, max_inner) budget for warm re-solves
    _WARM_BUDGET = (6, 20)

    def __init__(
        self,
        scenario,
        config,
        solver_config: Optional[SolverConfig] = None,
        first_solver_config: Optional[SolverConfig] = None,
        goal_tolerance: Optional[GoalTolerance] = None,
        euclidean_ablation: bool = False,
        multistart_waypoints=None,
    ):
        self.scenario = scenario
        self.config = config
        # Iteration-capped (not wall-clock-capped) defaults keep closed-loop
        # runs deterministic: identical scenario and config reproduce the
        # identical trace.
        self.solver_config = solver_config or SolverConfig(
            max_outer=self._WARM_BUDGET[0],
            max_inner=self._WARM_BUDGET[1],
            feas_tol=1e-4,
            opt_tol=1e-4,
        )
        self.first_solver_config = first_solver_config or SolverConfig(
            max_outer=30, max_inner=60, feas_tol=1e-4, opt_tol=1e-4
        )
        self.goal_tolerance = goal_tolerance or GoalTolerance()
        self.euclidean_ablation = euclidean_ablation
        self.multistart_waypoints = list(multistart_waypoints or [])
        model = scenario.model
        self.tags = (
            np.zeros(model.state_dim, dtype=bool)
            if euclidean_ablation
            else model.angular
        )
        self.state = ControllerState(
            N_n=self._initial_N(),
            u_p=np.asarray(scenario.boundary.u_prev, dtype=float).copy(),
            dt_p=float(scenario.boundary.dt_prev),
            x_f=np.asarray(config.x_f, dtype=float).copy(),
        )
        self._first_solve_done = False

    def _initial_N(self) -> int:
        raise NotImplementedError

    def set_goal(self, x_f):
        """Switch to a new intermediate goal; keeps u_p, resets the warm start."""
        self.state.x_f = np.asarray(x_f, dtype=float).copy()
        self.config.x_f = self.state.x_f
        self.state.grid = None
        self.state.N_n = self._initial_N()
        self.state.rho = None
        self._first_solve_done = False

    def goal_reached(self, x) -> bool:
        err = generic_boxminus(x, self.state.x_f, self.tags)
        pos = math.hypot(err[0], err[1])
        ang = abs(err[2]) if self.tags.size > 2 else 0.0
        return pos <= self.goal_tolerance.position and ang <= self.goal_tolerance.angle

    def _project_control(self, u) -> np.ndarray:
        """Exact projection onto the control box intersected with the rate box."""
        b = self.scenario.bounds
        lo = np.maximum(b.lower, self.state.u_p + self.state.dt_p * b.d_lower)
        hi = np.minimum(b.upper, self.state.u_p + self.state.dt_p * b.d_upper)
        return np.clip(np.asarray(u, dtype=float), lo, hi)

    def _window_control(self, grid: TrajectoryGrid, dt_p: float) -> np.ndarray:
        """Duration-weighted mean of the plan controls over the execution window.

        Near the end of a shrinking horizon the plan intervals can be shorter
        than the control period; averaging over [0, dt_p] keeps the applied
        zero-order hold consistent with the plan.
        """
        acc = np.zeros_like(grid.controls[0])
        lo = 0.0
        covered = 0.0
        for k in range(grid.N):
            hi = lo + float(grid.dts[k])
            w = min(hi, dt_p) - lo
            if w <= 0.0:
                break
            acc += w * grid.controls[k]
            covered += w
            lo = hi
        if covered < dt_p:
            acc += (dt_p - covered) * grid.controls[-1]
        return acc / dt_p

    def _fallback(self, dt_p) -> tuple:
        u = self._project_control(FALLBACK_DECAY * self.state.u_p)
        self.state.u_p = u.copy()
        self.state.dt_p = dt_p
        return u, StepDiagnostics(
            "fallback", SolverStatus.INFEASIBLE, math.nan, 0.0, math.nan, self.state.N_n, math.nan
        )

    def _associations(self, guess: TrajectoryGrid, t0: float):
        sc = self.scenario
        if not sc.obstacles:
            return None
        times = [t0 + k * float(guess.dts[min(k, guess.N - 1)]) for k in range(guess.N + 1)]
        assoc = associate_obstacles(
            list(guess.states),
            sc.obstacles,
            sc.association_cutoff,
            sc.association_k_max,
            sc.footprint,
            times,
        )
        # Moving obstacles are always kept: the optimizer may retime the
        # horizon, which shifts their predicted position arbitrarily far from
        # where the guess placed them.
        moving = [
            i for i, o in enumerate(sc.obstacles) if isinstance(o, MovingStadiumObstacle)
        ]
        if moving:
            for lst in assoc:
                for i in moving:
                    if i not in lst:
                        lst.append(i)
        return assoc

    def _solve_grid(
        self,
        guess: TrajectoryGrid,
        t0: float,
        cfg: SolverConfig,
        rounds: int = 1,
        rho_init: Optional[float] = None,
    ):
        """Solve the NLP; optionally repeat with obstacle associations rebuilt
        from the previous round's solution (the optimized path can leave the
        neighborhood the guess-time associations covered)."""
        grid = guess
        for _ in range(max(1, rounds)):
            prob = assemble_nlp(
                self.scenario,
                self.config,
                grid,
                t0=t0,
                associations=self._associations(grid, t0),
                euclidean_ablation=self.euclidean_ablation,
            )
            res = solve(prob, cfg, rho_init=rho_init)
            grid = extract_grid(prob, grid)
        return grid, res

    def _multistart_solve(self, x, t0: float, make_guess):
        """Solve one NLP per initialization in parallel; keep the best feasible."""
        guesses = [make_guess(None)] + [make_guess(w) for w in self.multistart_waypoints]
        cfg = self.first_solver_config
        if len(guesses) == 1:
            return self._solve_grid(guesses[0], t0, cfg, rounds=2)
        with ThreadPoolExecutor(max_workers=_max_workers()) as pool:
            outs = list(pool.map(lambda g: self._solve_grid(g, t0, cfg, rounds=2), guesses))

        def key(item):
            grid, res = item
            feasible = res.max_violation <= 10.0 * cfg.feas_tol
            return (not feasible, res.max_violation if not feasible else res.cost)

        return min(outs, key=key)


class QuadraticFormController(_BaseMpc):
    """Receding-horizon MPC with quadratic-form objective on a fixed grid."""

    # The fixed-horizon plan never reshapes, so warm re-solves always carry
    # the penalty level forward: at a cold penalty the tracking cost pulls a
    # near-feasible shifted plan far off the dynamics manifold, and a small
    # iteration budget cannot bring it back.
    _WARM_BUDGET = (2, 10)

    def _initial_N(self) -> int:
        return self.config.N

    def step(self, x, t_now: float, dt_p: float):
        x = np.asarray(x, dtype=float)
        self.state.dt_p = dt_p
        self.scenario.boundary.u_prev = self.state.u_p
        self.scenario.boundary.dt_prev = dt_p
        if self.goal_reached(x):
            u = np.zeros_like(self.state.u_p)
            self.state.u_p = u.copy()
            return u, StepDiagnostics(
                "finished", None, 0.0, 0.0, 0.0, self.state.N_n, self.config.dt_s
            )
        N = self.config.N
        if self.state.grid is None:
            def make_guess(waypoints):
                g = initialize_guess(
                    x,
                    self.state.x_f,
                    N,
                    self.config.dt_s,
                    self.tags,
                    waypoints=waypoints,
                    fixed_dt=True,
                    control_dim=self.scenario.model.control_dim,
                    yaw_channel=self.scenario.model.yaw_rate_channel,
                )
                return g

            try:
                grid, res = self._multistart_solve(x, t_now, make_guess)
            except FloatingPointError:
                return self._fallback(dt_p)
            self._first_solve_done = True
        else:
            guess = warm_start(
                self.state.grid, x, ShiftPolicy.RECEDING_SHIFT, self.tags, consumed=dt_p
            )
            rho0 = None if self.state.rho is None else min(self.state.rho, WARM_RHO_CAP)
            try:
                grid, res = self._solve_grid(guess, t_now, self.solver_config, rho_init=rho0)
            except FloatingPointError:
                return self._fallback(dt_p)
        if res.status == SolverStatus.INFEASIBLE or not np.all(np.isfinite(grid.controls)):
            return self._fallback(dt_p)
        self.state.grid = grid
        self.state.rho = res.rho
        u = self._project_control(grid.controls[0])
        self.state.u_p = u.copy()
        return u, StepDiagnostics(
            "ok",
            res.status,
            res.cost,
            res.wall_time,
            N * self.config.dt_s,
            N,
            self.config.dt_s,
        )


class TimeOptimalController(_BaseMpc):
    """Shrinking-horizon time-optimal (or hybrid) MPC with grid adaptation."""

    def _initial_N(self) -> int:
        return self.config.N_init

    def step(self, x, t_now: float, dt_p: float):
        x = np.asarray(x, dtype=float)
        self.state.dt_p = dt_p
        self.scenario.boundary.u_prev = self.state.u_p
        self.scenario.boundary.dt_prev = dt_p
        if self.goal_reached(x):
            u = np.zeros_like(self.state.u_p)
            self.state.u_p = u.copy()
            return u, StepDiagnostics("finished", None, 0.0, 0.0, 0.0, self.state.N_n, 0.0)
        N = self.state.N_n
        if self.state.grid is None:
            dt_init = self.config.dt_init or self.config.dt_s

            def make_guess(waypoints):
                return initialize_guess(
                    x,
                    self.state.x_f,
                    N,
                    dt_init,
                    self.tags,
                    waypoints=waypoints,
                    control_dim=self.scenario.model.control_dim,
                    mode=self.scenario.grid_mode,
                    yaw_channel=self.scenario.model.yaw_rate_channel,
                )

            try:
                grid, res = self._multistart_solve(x, t_now, make_guess)
            except FloatingPointError:
                return self._fallback(dt_p)
            self._first_solve_done = True
        else:
            guess = warm_start(
                self.state.grid, x, ShiftPolicy.SHRINKING_REPIN, self.tags, consumed=dt_p
            )
            if guess.N != N:
                guess = resample_grid(guess, N, self.tags)
                guess.states[0] = x
            rho0 = None
            if self.config.carry_penalty and self.state.rho is not None:
                rho0 = min(self.state.rho, WARM_RHO_CAP)
            try:
                grid, res = self._solve_grid(guess, t_now, self.solver_config, rho_init=rho0)
            except FloatingPointError:
                return self._fallback(dt_p)
        if res.status == SolverStatus.INFEASIBLE or not np.all(np.isfinite(grid.controls)):
            return self._fallback(dt_p)
        # Carry the penalty level forward only while the plan keeps shortening.
        # A plan whose total time grows while real time passes means the frozen
        # penalty is blocking reoptimization; restart it cold next step.
        prev_tf = self.state.grid.total_time if self.state.grid is not None else None
        stalled = prev_tf is not None and grid.total_time > prev_tf
        self.state.grid = grid
        self.state.rho = None if stalled else res.rho
        dt_star = float(np.mean(grid.dts))
        # Adapt the grid only off near-feasible solves; an iterate that has not
        # reached the terminal constraint reports a meaningless dt*.
        if res.max_violation <= 10.0 * self.solver_config.feas_tol:
            self.state.N_n = grid_adapt(N, dt_star, self.config)
        u = self._project_control(self._window_control(grid, dt_p))
        self.state.u_p = u.copy()
        return u, StepDiagnostics(
            "ok", res.status, res.cost, res.wall_time, grid.total_time, N, dt_star,
            res.max_violation,
        )


def make_controller(scenario, variant: Optional[str] = None, **kwargs):
    """Build the controller configured by a scenario (optionally overriding the variant)."""
    variant = variant or scenario.controller_variant
    cfg = scenario.controller_config(variant)
    tol = GoalTolerance(*scenario.goal_tolerance)
    if isinstance(cfg, QuadraticFormConfig):
        return QuadraticFormController(scenario, cfg, goal_tolerance=tol, **kwargs)
    return TimeOptimalController(
        scenario,
        cfg,
        goal_tolerance=tol,
        multistart_waypoints=kwargs.pop("multistart_waypoints", scenario.multistart_waypoints),
        **kwargs,
    )
