"""Property tests for the increment/difference operators."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from se2mpc.manifold import (
    SE2_MASK,
    SE2_TAGS,
    ManifoldTag,
    SE2State,
    StateIncrement,
    boxminus,
    boxplus,
    generic_boxminus,
    generic_boxplus,
    interpolate,
    norm_angle,
    tags_to_mask,
)

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
angles = st.floats(-math.pi, math.pi, allow_nan=False, allow_infinity=False)


def test_norm_angle_range_and_values():
    assert norm_angle(0.0) == 0.0
    assert norm_angle(math.pi) == pytest.approx(-math.pi)
    assert norm_angle(3 * math.pi) == pytest.approx(-math.pi)
    assert norm_angle(-math.pi - 1e-3) == pytest.approx(math.pi - 1e-3)
    arr = norm_angle(np.array([0.0, 2 * math.pi, -2 * math.pi]))
    np.testing.assert_allclose(arr, 0.0, atol=1e-15)


def test_norm_angle_rejects_nonfinite():
    with pytest.raises(ValueError):
        norm_angle(math.inf)
    with pytest.raises(ValueError):
        norm_angle(np.array([0.0, math.nan]))


def test_tags_to_mask():
    np.testing.assert_array_equal(tags_to_mask(SE2_TAGS), [False, False, True])
    mask = np.array([True, False])
    assert tags_to_mask(mask) is mask
    np.testing.assert_array_equal(
        tags_to_mask([ManifoldTag.ANGULAR]), np.array([True])
    )


def test_se2_state_normalizes_theta():
    s = SE2State(1.0, 2.0, 3 * math.pi)
    assert s.theta == pytest.approx(-math.pi)
    np.testing.assert_allclose(
        SE2State.from_array(s.as_array()).as_array(), s.as_array()
    )


@given(finite, finite, angles, finite, finite, st.floats(-10, 10))
@settings(max_examples=500, deadline=None)
def test_boxplus_boxminus_roundtrip(x, y, th, dx, dy, dth):
    a = SE2State(x, y, th)
    b = boxplus(a, StateIncrement(dx, dy, dth))
    d = boxminus(b, a)
    assert d.dx == pytest.approx(dx, abs=1e-9)
    assert d.dy == pytest.approx(dy, abs=1e-9)
    # recovered rotation agrees modulo 2*pi
    assert norm_angle(d.dtheta - dth) == pytest.approx(0.0, abs=1e-9)


@given(angles, angles)
@settings(max_examples=300, deadline=None)
def test_boxminus_is_shortest_arc(t1, t2):
    d = boxminus(SE2State(0, 0, t2), SE2State(0, 0, t1)).dtheta
    assert abs(d) <= math.pi
    assert norm_angle(t1 + d - t2) == pytest.approx(0.0, abs=1e-12)


def test_seam_crossing_is_short():
    # -3.1 -> 1.57 crosses the pi seam; the difference must be the short way
    d = generic_boxminus([0.0, 0.0, 1.57], [0.0, 0.0, -3.1], SE2_MASK)
    assert d[2] == pytest.approx(1.57 - (-3.1) - 2 * math.pi, abs=1e-12)
    assert abs(d[2]) == pytest.approx(1.6132, abs=1e-4)


@given(st.lists(finite, min_size=3, max_size=3), st.lists(finite, min_size=3, max_size=3))
@settings(max_examples=300, deadline=None)
def test_generic_roundtrip(v, w):
    v = np.array(v)
    v[2] = norm_angle(v[2])
    w = np.array(w)
    d = generic_boxminus(w, v, SE2_MASK)
    w2 = generic_boxplus(v, d, SE2_MASK)
    np.testing.assert_allclose(w2[:2], w[:2], atol=1e-9)
    assert norm_angle(w2[2] - w[2]) == pytest.approx(0.0, abs=1e-9)


@given(st.lists(finite, min_size=2, max_size=6))
@settings(max_examples=200, deadline=None)
def test_euclidean_reduces_to_subtraction(v):
    v = np.array(v)
    tags = np.zeros(v.size, dtype=bool)
    np.testing.assert_array_equal(generic_boxminus(v, 0 * v, tags), v)
    np.testing.assert_array_equal(generic_boxplus(0 * v, v, tags), v)


def test_boxplus_zero_is_idempotent():
    rng = np.random.default_rng(7)
    for _ in range(100):
        v = rng.normal(size=3)
        v[2] = norm_angle(v[2])
        out = generic_boxplus(v, np.zeros(3), SE2_MASK)
        np.testing.assert_allclose(out, v, atol=1e-15)


def test_generic_boxplus_shape_mismatch():
    with pytest.raises(ValueError):
        generic_boxplus(np.zeros(3), np.zeros(2), SE2_MASK)


def test_interpolate_shortest_arc():
    a = np.array([0.0, 0.0, 3.0])
    b = np.array([1.0, 0.0, -3.0])
    mid = interpolate(a, b, 0.5, SE2_MASK)
    # halfway across the seam, not through zero
    assert abs(abs(mid[2]) - math.pi) < 0.15
    np.testing.assert_allclose(interpolate(a, b, 0.0, SE2_MASK), a)
    np.testing.assert_allclose(interpolate(a, b, 1.0, SE2_MASK)[:2], b[:2])
