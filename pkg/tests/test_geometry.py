"""Collision geometry: distances, footprints, obstacles, association."""

import math

import numpy as np
import pytest

from se2mpc.geometry import (
    Disc,
    MovingStadiumObstacle,
    PointObstacle,
    SegmentObstacle,
    SeparationSpec,
    Stadium,
    associate_obstacles,
    dist_point_segment,
    dist_point_segment_rows,
    dist_segment_segment,
    dist_segment_segment_rows,
    in_collision_free_set,
    min_distance,
    signed_clearance,
    signed_clearance_rows,
)
from se2mpc.scenarios import parking_scenario


def test_point_segment_degenerate_345():
    assert dist_point_segment((3, 4), (0, 0), (0, 0)) == pytest.approx(5.0)


def test_point_segment_interior_and_endpoints():
    assert dist_point_segment((0.5, 1.0), (0, 0), (1, 0)) == pytest.approx(1.0)
    assert dist_point_segment((-1, 0), (0, 0), (1, 0)) == pytest.approx(1.0)
    assert dist_point_segment((2, 0), (0, 0), (1, 0)) == pytest.approx(1.0)


def test_segment_segment_cases():
    # crossing
    assert dist_segment_segment((-1, 0), (1, 0), (0, -1), (0, 1)) == 0.0
    # parallel
    assert dist_segment_segment((0, 0), (1, 0), (0, 1), (1, 1)) == pytest.approx(1.0)
    # collinear disjoint
    assert dist_segment_segment((0, 0), (1, 0), (2, 0), (3, 0)) == pytest.approx(1.0)
    # touching endpoints
    assert dist_segment_segment((0, 0), (1, 0), (1, 0), (2, 1)) == pytest.approx(0.0)


def test_row_wise_matches_scalar():
    rng = np.random.default_rng(11)
    P, A, B = (rng.normal(size=(200, 2)) for _ in range(3))
    ref = np.array([dist_point_segment(p, a, b) for p, a, b in zip(P, A, B)])
    np.testing.assert_allclose(dist_point_segment_rows(P, A, B), ref, atol=1e-14)
    A1, B1, A2, B2 = (rng.normal(size=(200, 2)) for _ in range(4))
    ref = np.array(
        [dist_segment_segment(a, b, c, d) for a, b, c, d in zip(A1, B1, A2, B2)]
    )
    np.testing.assert_allclose(
        dist_segment_segment_rows(A1, B1, A2, B2), ref, atol=1e-14
    )


def test_disc_and_stadium_axes():
    a, b = Disc(0.3).axis((1.0, 2.0, 0.7))
    assert a == b == (1.0, 2.0)
    st = Stadium(rear_offset=1.0, length=3.0, radius=0.5)
    a, b = st.axis((0.0, 0.0, 0.0))
    np.testing.assert_allclose(a, (-1.0, 0.0))
    np.testing.assert_allclose(b, (2.0, 0.0))


def test_moving_stadium_translates():
    o = MovingStadiumObstacle(origin=(0.0, 1.0), length=2.0, radius=0.4, velocity=1.5)
    a, b = o.segment(2.0)
    np.testing.assert_allclose(a, (3.0, 1.0))
    np.testing.assert_allclose(b, (5.0, 1.0))


def test_signed_clearance_and_penetration():
    fp = Disc(0.5)
    obs = PointObstacle((2.0, 0.0), radius=0.5)
    assert signed_clearance(fp, (0.0, 0.0, 0.0), obs, 0.0) == pytest.approx(1.0)
    # overlapping: negative clearance, clamped min_distance
    assert signed_clearance(fp, (1.5, 0.0, 0.0), obs, 0.0) == pytest.approx(-0.5)
    assert min_distance(fp, (1.5, 0.0, 0.0), obs) == 0.0


def test_signed_clearance_rows_matches_scalar():
    rng = np.random.default_rng(5)
    fp = Stadium(rear_offset=1.7, length=2.8, radius=0.9)
    obs = MovingStadiumObstacle(origin=(-13.0, -1.25), length=2.5, radius=0.9, velocity=1.0)
    X = rng.normal(scale=4.0, size=(100, 3))
    T = rng.uniform(0, 20, size=100)
    ref = np.array([signed_clearance(fp, x, obs, t) for x, t in zip(X, T)])
    np.testing.assert_allclose(signed_clearance_rows(fp, X, obs, T), ref, atol=1e-13)
    seg = SegmentObstacle((-1.0, 2.0), (4.0, 2.0), radius=0.1)
    ref = np.array([signed_clearance(fp, x, seg, t) for x, t in zip(X, T)])
    np.testing.assert_allclose(signed_clearance_rows(fp, X, seg, T), ref, atol=1e-13)


def test_separation_spec_validation():
    with pytest.raises(ValueError):
        SeparationSpec(-0.1)


def test_parking_start_is_collision_free():
    scn = parking_scenario()
    ok, dists = in_collision_free_set(
        scn.footprint, scn.start, scn.obstacles, 0.0, SeparationSpec(0.2)
    )
    assert ok
    # sampling cross-check of the minimum over road segments
    assert min(dists) >= 0.2


def test_associate_obstacles():
    fp = Disc(0.1)
    obstacles = [PointObstacle((float(i), 0.0)) for i in range(5)]
    states = [np.array([0.0, 0.0, 0.0]), np.array([4.0, 0.0, 0.0])]
    assoc = associate_obstacles(states, obstacles, cutoff=1.5, k_max=2, fp=fp)
    assert assoc[0] == [0, 1]
    assert assoc[1] == [4, 3]
    with pytest.raises(ValueError):
        associate_obstacles(states, obstacles, cutoff=0.0, k_max=2, fp=fp)
    with pytest.raises(ValueError):
        associate_obstacles(states, obstacles, cutoff=1.0, k_max=0, fp=fp)


def test_associate_obstacles_moving_uses_time():
    fp = Disc(0.1)
    obs = [MovingStadiumObstacle(origin=(-10.0, 0.0), length=1.0, radius=0.1, velocity=1.0)]
    states = [np.array([0.0, 0.0, 0.0])]
    far = associate_obstacles(states, obs, cutoff=2.0, k_max=1, fp=fp, times=[0.0])
    near = associate_obstacles(states, obs, cutoff=2.0, k_max=1, fp=fp, times=[9.5])
    assert far == [[]]
    assert near == [[0]]
