"""Controller-level units: grid adaptation, projection, configs."""

import math

import numpy as np
import pytest

from se2mpc.controller import (
    GoalTolerance,
    QuadraticFormConfig,
    TimeOptimalConfig,
    grid_adapt,
    make_controller,
    quadratic_cost_terms,
    terminal_cost,
)
from se2mpc.manifold import SE2_MASK
from se2mpc.scenarios import diff_drive_scenario, parking_scenario
from se2mpc.transcription import TrajectoryGrid


def _to_config(**kw):
    kw.setdefault("N_init", 20)
    kw.setdefault("dt_s", 0.1)
    kw.setdefault("dt_eps", 0.01)
    kw.setdefault("x_f", np.zeros(3))
    return TimeOptimalConfig(**kw)


def test_grid_adapt_hysteresis():
    cfg = _to_config()
    assert grid_adapt(20, 0.1, cfg) == 20  # inside the band
    assert grid_adapt(20, 0.105, cfg) == 20  # still inside
    assert grid_adapt(20, 0.12, cfg) == 21  # too coarse -> grow
    assert grid_adapt(20, 0.08, cfg) == 19  # too fine -> shrink
    assert grid_adapt(2, 0.01, cfg) == 2  # clamped at N_min
    with pytest.raises(ValueError):
        grid_adapt(20, 0.0, cfg)
    with pytest.raises(ValueError):
        grid_adapt(1, 0.1, cfg)


def test_grid_adapt_changes_at_most_one():
    cfg = _to_config()
    for dt_star in (1e-3, 0.05, 0.1, 0.5, 10.0):
        n2 = grid_adapt(20, dt_star, cfg)
        assert abs(n2 - 20) <= 1


def test_config_validation():
    with pytest.raises(ValueError):
        _to_config(dt_eps=0.0)
    with pytest.raises(ValueError):
        _to_config(N_init=1)
    with pytest.raises(ValueError):
        QuadraticFormConfig(
            Q=np.diag([1.0, 1.0, -1.0]),
            Q_f=np.eye(3),
            R=np.eye(2),
            N=10,
            dt_s=0.1,
            x_f=np.zeros(3),
        )
    with pytest.raises(ValueError):
        QuadraticFormConfig(
            Q=np.eye(3), Q_f=np.eye(3), R=np.eye(2), N=10, dt_s=0.1,
            x_f=np.zeros(3), terminal="sometimes",
        )


def test_cost_helpers_are_seam_aware():
    x_f = np.array([0.0, 0.0, 1.57])
    x = np.array([0.0, 0.0, -3.1])
    c = quadratic_cost_terms(x, np.zeros(2), x_f, np.eye(3), np.eye(2), SE2_MASK)
    assert c == pytest.approx(1.6132**2, abs=1e-3)
    assert terminal_cost(x_f, x_f, np.eye(3), SE2_MASK) == 0.0


def test_goal_reached_wraps_angle():
    scn = parking_scenario()
    ctl = make_controller(scn, variant="hybrid")
    ctl.set_goal(np.array([0.0, 0.0, math.pi - 0.01]))
    assert ctl.goal_reached(np.array([0.0, 0.0, -math.pi + 0.01]))
    assert not ctl.goal_reached(np.array([0.0, 0.3, math.pi - 0.01]))


def test_project_control_respects_both_boxes():
    scn = diff_drive_scenario()
    ctl = make_controller(scn, variant="quad")
    ctl.state.u_p = np.array([0.0, 0.0])
    ctl.state.dt_p = 0.1
    u = ctl._project_control(np.array([10.0, -10.0]))
    b = scn.bounds
    assert np.all(u <= np.minimum(b.upper, ctl.state.u_p + 0.1 * b.d_upper) + 1e-12)
    assert np.all(u >= np.maximum(b.lower, ctl.state.u_p + 0.1 * b.d_lower) - 1e-12)


def test_window_control_duration_weighted():
    scn = diff_drive_scenario()
    ctl = make_controller(scn, variant="to")
    grid = TrajectoryGrid(
        states=np.zeros((3, 3)),
        controls=np.array([[1.0, 0.0], [3.0, 0.0]]),
        dts=np.array([0.05, 0.05]),
    )
    u = ctl._window_control(grid, 0.1)
    np.testing.assert_allclose(u, [2.0, 0.0])
    # window longer than the plan: tail control is held
    u = ctl._window_control(grid, 0.2)
    np.testing.assert_allclose(u, [2.5, 0.0])


def test_set_goal_resets_warm_start():
    scn = diff_drive_scenario()
    ctl = make_controller(scn, variant="to")
    ctl.state.grid = TrajectoryGrid(np.zeros((3, 3)), np.zeros((2, 2)), np.full(2, 0.1))
    ctl.set_goal(np.array([1.0, 1.0, 0.0]))
    assert ctl.state.grid is None
    np.testing.assert_allclose(ctl.state.x_f, [1.0, 1.0, 0.0])


def test_make_controller_variants():
    scn = diff_drive_scenario()
    assert type(make_controller(scn, "quad")).__name__ == "QuadraticFormController"
    assert type(make_controller(scn, "to")).__name__ == "TimeOptimalController"
    assert type(make_controller(scn, "hybrid")).__name__ == "TimeOptimalController"
    with pytest.raises(ValueError):
        scn.controller_config("banana")


def test_goal_tolerance_defaults():
    tol = GoalTolerance()
    assert tol.position == 0.1
    assert tol.angle == 0.05
