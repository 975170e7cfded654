"""Transcription: guess construction, defects, hypergraph assembly, batches."""

import math

import numpy as np
import pytest

from se2mpc.dynamics import diff_drive_model
from se2mpc.geometry import MovingStadiumObstacle, associate_obstacles
from se2mpc.manifold import SE2_MASK, norm_angle
from se2mpc.scenarios import diff_drive_scenario, parking_scenario
from se2mpc.transcription import (
    CollocationKernel,
    EdgeKind,
    GridMode,
    TrajectoryGrid,
    assemble_nlp,
    defect,
    extract_grid,
    initialize_guess,
    time_of_state,
)


def _arc_state(t, v, w):
    return np.array([v / w * math.sin(w * t), v / w * (1 - math.cos(w * t)), w * t])


def _defect_norm(kernel, dt, v=1.0, w=0.8):
    model = diff_drive_model()
    u = np.array([v, w])
    worst = 0.0
    for k in range(8):
        x0 = _arc_state(k * dt, v, w)
        x1 = _arc_state((k + 1) * dt, v, w)
        worst = max(worst, float(np.max(np.abs(defect(kernel, x0, x1, u, dt, model)))))
    return worst


def _loglog_slope(dts, errs):
    return float(np.polyfit(np.log(dts), np.log(errs), 1)[0])


def test_collocation_orders():
    dts = np.array([0.2, 0.1, 0.05, 0.025, 0.0125])
    e_fwd = [_defect_norm(CollocationKernel.FORWARD_DIFF, dt) for dt in dts]
    e_cn = [_defect_norm(CollocationKernel.CRANK_NICOLSON, dt) for dt in dts]
    assert _loglog_slope(dts, e_fwd) == pytest.approx(1.0, abs=0.15)
    assert _loglog_slope(dts, e_cn) == pytest.approx(2.0, abs=0.2)


def test_defect_zero_on_exact_euler_step():
    model = diff_drive_model()
    x0 = np.array([0.0, 0.0, 0.3])
    u = np.array([1.0, 0.0])
    dt = 0.1
    x1 = x0 + dt * model.f(x0, u)
    x1[2] = norm_angle(x1[2])
    d = defect(CollocationKernel.FORWARD_DIFF, x0, x1, u, dt, model)
    np.testing.assert_allclose(d, 0.0, atol=1e-14)
    with pytest.raises(ValueError):
        defect(CollocationKernel.FORWARD_DIFF, x0, x1, u, 0.0, model)


def test_trajectory_grid_validation():
    with pytest.raises(ValueError):
        TrajectoryGrid(np.zeros((2, 3)), np.zeros((1, 2)), np.array([0.0]))


def test_time_of_state():
    g = TrajectoryGrid(np.zeros((4, 3)), np.zeros((3, 2)), np.full(3, 0.2))
    assert time_of_state(0, g) == 0.0
    assert time_of_state(3, g) == pytest.approx(0.6)
    with pytest.raises(ValueError):
        time_of_state(4, g)


def test_initialize_guess_endpoints_and_seam():
    x_s = np.array([1.0, 1.75, -3.1])
    x_f = np.array([-4.0, -6.0, 1.57])
    g = initialize_guess(x_s, x_f, 20, 0.2, SE2_MASK)
    np.testing.assert_allclose(g.states[0], x_s)
    np.testing.assert_allclose(g.states[-1][:2], x_f[:2], atol=1e-12)
    assert norm_angle(g.states[-1][2] - x_f[2]) == pytest.approx(0.0, abs=1e-12)
    # heading interpolates the short way across the seam: never near zero
    mid = g.states[10][2]
    assert abs(mid) > 2.0


def test_initialize_guess_waypoints_and_velocity_seed():
    x_s = np.array([0.0, 0.0, 0.0])
    x_f = np.array([4.0, 0.0, 0.0])
    g = initialize_guess(x_s, x_f, 8, 0.5, SE2_MASK, waypoints=[[2.0, 1.0, 0.5]])
    # path passes near the waypoint
    d = np.min(np.hypot(g.states[:, 0] - 2.0, g.states[:, 1] - 1.0))
    assert d < 0.5
    # first control channel carries the implied longitudinal velocity
    assert np.any(np.abs(g.controls[:, 0]) > 0.1)
    with pytest.raises(ValueError):
        initialize_guess(x_s, x_f, 0, 0.5, SE2_MASK)


def _parking_problem(N=50, with_obstacles=True):
    scn = parking_scenario()
    cfg = scn.controller_config("hybrid")
    guess = initialize_guess(
        scn.start,
        cfg.x_f,
        N,
        10.0 / N,
        scn.model.angular,
        waypoints=scn.multistart_waypoints[0],
        mode=scn.grid_mode,
        control_dim=2,
    )
    assoc = None
    if with_obstacles:
        times = np.concatenate([[0.0], np.cumsum(guess.dts)])
        assoc = associate_obstacles(
            list(guess.states),
            scn.obstacles,
            scn.association_cutoff,
            scn.association_k_max,
            scn.footprint,
            times=times,
        )
        moving = [
            i for i, o in enumerate(scn.obstacles) if isinstance(o, MovingStadiumObstacle)
        ]
        assoc = [sorted(set(a) | set(moving)) for a in assoc]
    return scn, cfg, guess, assemble_nlp(scn, cfg, guess, associations=assoc)


def test_parking_edge_counts():
    _, _, _, prob = _parking_problem(N=50)
    defects = prob.edges_of("defect")
    deviations = prob.edges_of("deviation")
    assert len(defects) == 50
    assert all(e.dim == 3 for e in defects)
    assert len(deviations) == 51  # includes both boundary edges
    assert len(prob.edges_of("terminal")) == 1
    assert len(prob.edges_of("obstacle")) > 0


def test_parking_families():
    _, _, _, prob = _parking_problem(N=30)
    fams = prob.families()
    assert {"cost", "defect", "deviation", "terminal", "obstacle", "bound"} <= fams


def test_batches_agree_with_edges():
    """Every batched family evaluates row-identical to its scalar edges."""
    _, _, _, prob = _parking_problem(N=25)
    rng = np.random.default_rng(2)
    for v in prob.vertices.values():
        if not v.fixed:
            v.values = v.values + rng.normal(scale=0.1, size=v.values.shape)
    by_id = {e.id: e for e in prob.edges}
    assert prob.batches
    for b in prob.batches:
        Z = [
            np.array([prob.vertices[vid].values for vid in slot]) for slot in b.slots
        ]
        R = np.asarray(b.fn(*Z), dtype=float)
        for m, eid in enumerate(b.edge_ids):
            e = by_id[eid]
            ref = np.atleast_1d(np.asarray(e.fn(*prob.edge_values(e)), dtype=float))
            np.testing.assert_allclose(R[m], ref, atol=1e-13, err_msg=eid)


def test_global_uniform_shares_one_dt_vertex():
    _, _, guess, prob = _parking_problem(N=20)
    assert guess.mode == GridMode.GLOBAL_UNIFORM
    assert "dt" in prob.vertices
    assert "dt0" not in prob.vertices
    assert not prob.edges_of("uniformity")


def test_local_uniform_has_uniformity_chain():
    scn = diff_drive_scenario()
    cfg = scn.controller_config("to")
    guess = initialize_guess(
        scn.start, cfg.x_f, 10, 0.3, scn.model.angular, mode=scn.grid_mode
    )
    prob = assemble_nlp(scn, cfg, guess)
    assert len(prob.edges_of("uniformity")) == 9
    assert all(e.kind == EdgeKind.EQUALITY for e in prob.edges_of("uniformity"))


def test_extract_grid_roundtrip():
    _, _, guess, prob = _parking_problem(N=15)
    out = extract_grid(prob, guess)
    np.testing.assert_allclose(out.states, guess.states)
    np.testing.assert_allclose(out.controls, guess.controls)
    np.testing.assert_allclose(out.dts, guess.dts)


def test_quadratic_form_assembly():
    scn = diff_drive_scenario()
    cfg = scn.controller_config("quad")
    guess = initialize_guess(
        scn.start, cfg.x_f, cfg.N, cfg.dt_s, scn.model.angular, fixed_dt=True
    )
    prob = assemble_nlp(scn, cfg, guess)
    assert "dt" not in prob.vertices and "dt0" not in prob.vertices
    assert len(prob.edges_of("defect")) == cfg.N
    # free terminal: no terminal equality edge, terminal cost instead
    assert not prob.edges_of("terminal")
    assert any(e.id == "cost_term" for e in prob.edges)
