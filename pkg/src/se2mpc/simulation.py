"""Closed-loop simulation harness and trace/metrics utilities.

The harness runs an MPC controller against the RK4 plant at a fixed control
rate, chaining multiple goals into one episode and halting on collision.
"""

from __future__ import annotations

import csv
import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .controller import make_controller
from .dynamics import plant_integrate
from .geometry import SeparationSpec, in_collision_free_set


@dataclass
class ClosedLoopTrace:
    """Per-step record of one closed-loop run."""

    t: list = field(default_factory=list)
    states: list = field(default_factory=list)
    controls: list = field(default_factory=list)
    solve_ms: list = field(default_factory=list)
    status: list = field(default_factory=list)
    N: list = field(default_factory=list)
    tf_star: list = field(default_factory=list)
    dt_star: list = field(default_factory=list)
    min_dist: list = field(default_factory=list)
    outcome: str = "running"  # "finished", "collision", "timeout"
    goal_times: list = field(default_factory=list)  # time each goal was reached

    def __len__(self) -> int:
        return len(self.t)


@dataclass
class Metrics:
    travel_time: float
    path_length: float
    control_effort: float
    cpu_median_ms: float
    cpu_q05_ms: float
    cpu_q95_ms: float


def run_closed_loop(
    scenario,
    controller=None,
    rate: float = 10.0,
    max_sim_time: float = 120.0,
    variant: Optional[str] = None,
    controller_kwargs: Optional[dict] = None,
) -> ClosedLoopTrace:
    """Simulate the scenario closed-loop at `rate` Hz through all its goals."""
    if rate <= 0:
        raise ValueError("rate must be positive")
    if controller is None:
        controller = make_controller(scenario, variant, **(controller_kwargs or {}))
    dt_p = 1.0 / rate
    x = np.asarray(scenario.start, dtype=float).copy()
    goals = [np.asarray(g, dtype=float) for g in scenario.goals]
    goal_idx = 0
    controller.set_goal(goals[0])
    spec = SeparationSpec(0.0)
    trace = ClosedLoopTrace()
    t = 0.0
    n_steps = int(round(max_sim_time * rate))
    for _ in range(n_steps):
        u, diag = controller.step(x, t, dt_p)
        if diag.status == "finished":
            trace.goal_times.append(t)
            goal_idx += 1
            if goal_idx >= len(goals):
                trace.outcome = "finished"
                # record the terminal state so the trace ends at the goal
                ok, dists = in_collision_free_set(
                    scenario.footprint, x, scenario.obstacles, t, spec
                )
                trace.t.append(t)
                trace.states.append(x.copy())
                trace.controls.append(np.zeros_like(np.asarray(u, dtype=float)))
                trace.solve_ms.append(0.0)
                trace.status.append("finished")
                trace.N.append(diag.N)
                trace.tf_star.append(0.0)
                trace.dt_star.append(0.0)
                trace.min_dist.append(min(dists) if dists else math.inf)
                break
            controller.set_goal(goals[goal_idx])
            u, diag = controller.step(x, t, dt_p)
        ok, dists = in_collision_free_set(
            scenario.footprint, x, scenario.obstacles, t, spec
        )
        d = min(dists) if dists else math.inf
        trace.t.append(t)
        trace.states.append(x.copy())
        trace.controls.append(np.asarray(u, dtype=float).copy())
        trace.solve_ms.append(1e3 * diag.solve_time)
        trace.status.append(diag.status)
        trace.N.append(diag.N)
        trace.tf_star.append(diag.tf_star)
        trace.dt_star.append(diag.dt_star)
        trace.min_dist.append(d)
        if not ok:
            trace.outcome = "collision"
            break
        x = plant_integrate(scenario.model, x, u, dt_p)
        t += dt_p
    else:
        trace.outcome = "timeout"
    return trace


def compute_metrics(trace: ClosedLoopTrace, rate: float) -> Metrics:
    """Aggregate travel time, path length, control effort and CPU statistics."""
    if len(trace) == 0:
        return Metrics(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    states = np.asarray(trace.states)
    controls = np.asarray(trace.controls)
    travel_time = trace.goal_times[-1] if trace.goal_times else trace.t[-1] + 1.0 / rate
    path_length = float(
        np.sum(np.hypot(np.diff(states[:, 0]), np.diff(states[:, 1])))
    )
    effort = float(np.sum(controls * controls) / rate)
    solve = np.asarray([s for s, st in zip(trace.solve_ms, trace.status) if st == "ok"])
    if solve.size == 0:
        solve = np.zeros(1)
    return Metrics(
        travel_time=float(travel_time),
        path_length=path_length,
        control_effort=effort,
        cpu_median_ms=float(np.median(solve)),
        cpu_q05_ms=float(np.quantile(solve, 0.05)),
        cpu_q95_ms=float(np.quantile(solve, 0.95)),
    )


def export_trace_csv(trace: ClosedLoopTrace, path: str) -> None:
    """Write the trace as CSV atomically (temp file + rename)."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                [
                    "t",
                    "x",
                    "y",
                    "theta",
                    "u1",
                    "u2",
                    "solve_ms",
                    "status",
                    "N",
                    "tf_star",
                    "min_dist",
                ]
            )
            for i in range(len(trace)):
                s = trace.states[i]
                u = trace.controls[i]
                writer.writerow(
                    [
                        f"{trace.t[i]:.6f}",
                        f"{s[0]:.9f}",
                        f"{s[1]:.9f}",
                        f"{s[2]:.9f}",
                        f"{u[0]:.9f}",
                        f"{u[1]:.9f}",
                        f"{trace.solve_ms[i]:.3f}",
                        trace.status[i],
                        trace.N[i],
                        f"{trace.tf_star[i]:.6f}",
                        f"{trace.min_dist[i]:.6f}",
                    ]
                )
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_gnuplot_script(csv_path: str, out_path: str) -> None:
    """Emit a gnuplot script plotting the xy path from an exported trace."""
    script = (
        "set datafile separator ','\n"
        "set size ratio -1\n"
        "set xlabel 'x [m]'\n"
        "set ylabel 'y [m]'\n"
        f"plot '{csv_path}' using 2:3 every ::1 with lines title 'path'\n"
    )
    directory = os.path.dirname(os.path.abspath(out_path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(script)
    os.replace(tmp, out_path)
