import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from moviemap.geometry import (
    Rect,
    angular_distance,
    bearing_of,
    equirect_column_shift,
    polyline_crossing_points,
    rects_overlap,
    wrap_angle,
)

finite_angles = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)


@given(finite_angles)
def test_wrap_angle_lands_in_half_open_interval(a):
    w = wrap_angle(a)
    assert -math.pi <= w < math.pi


def test_wrap_angle_maps_pi_to_minus_pi():
    assert wrap_angle(math.pi) == -math.pi
    assert wrap_angle(-math.pi) == -math.pi


@given(st.floats(min_value=-math.pi, max_value=math.pi - 1e-12))
def test_wrap_angle_identity_in_range(a):
    assert wrap_angle(a) == pytest.approx(a, abs=1e-12)


def test_wrap_angle_seam_collapse():
    # The largest double below +pi rounds to 2*pi inside the formula and
    # collapses to -pi: range-correct, angularly a no-op.
    just_below_pi = math.nextafter(math.pi, 0.0)
    assert wrap_angle(just_below_pi) == -math.pi
    assert angular_distance(wrap_angle(just_below_pi), just_below_pi) < 1e-12


def test_wrap_angle_works_on_arrays():
    out = wrap_angle(np.array([0.0, 3 * math.pi, -3 * math.pi]))
    assert np.allclose(out, [0.0, -math.pi, -math.pi])


def test_bearing_of_cardinal_directions():
    assert bearing_of((1.0, 0.0)) == 0.0
    assert bearing_of((0.0, 1.0)) == pytest.approx(math.pi / 2)
    assert bearing_of((-1.0, 0.0)) == -math.pi  # +pi wraps to the canonical -pi


def test_angular_distance_crosses_the_seam():
    assert angular_distance(math.pi - 0.05, -math.pi + 0.05) == pytest.approx(0.1)


def test_rects_overlap_touching_counts():
    a = Rect(0, 0, 1, 1)
    assert rects_overlap(a, Rect(1, 1, 2, 2))
    assert not rects_overlap(a, Rect(1.001, 0, 2, 1))
    assert rects_overlap(a, Rect(0.5, 0.5, 0.6, 0.6))


def test_polyline_single_crossing():
    a = np.array([[-5, 0], [5, 0]], dtype=float)
    b = np.array([[0.3, -5], [0.3, 5]], dtype=float)
    pts = polyline_crossing_points(a, b)
    assert len(pts) == 1
    assert pts[0] == pytest.approx((0.3, 0.0))


def test_polyline_crossing_at_shared_vertex_counted_once():
    a = np.array([[-2, 0], [0, 0], [2, 0]], dtype=float)
    b = np.array([[0, -2], [0, 0], [0, 2]], dtype=float)
    assert len(polyline_crossing_points(a, b)) == 1


def test_polyline_double_crossing():
    straight = np.array([[-50, 0], [50, 0]], dtype=float)
    u_shape = np.array([[-20, 30], [-20, -20], [20, -20], [20, 30]], dtype=float)
    assert len(polyline_crossing_points(straight, u_shape)) == 2


def test_polyline_disjoint():
    a = np.array([[0, 0], [10, 0]], dtype=float)
    b = np.array([[0, 5], [10, 5]], dtype=float)
    assert polyline_crossing_points(a, b) == []


def test_column_shift_derived_value():
    # round(0.1 / (2*pi) * 3600) = round(57.2957...) = 57
    assert equirect_column_shift(0.1, 3600) == 57


def test_column_shift_full_turn_is_identity():
    assert equirect_column_shift(2 * math.pi, 1024) == 0
    assert equirect_column_shift(0.0, 1024) == 0


@given(st.floats(min_value=-10, max_value=10), st.sampled_from([256, 1024, 3600]))
def test_column_shift_opposites_cancel(yaw, width):
    s1 = equirect_column_shift(yaw, width)
    s2 = equirect_column_shift(-yaw, width)
    assert (s1 + s2) % width == 0
