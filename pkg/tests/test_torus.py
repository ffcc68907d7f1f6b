import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mutclock.rng import Xoshiro256PP
from mutclock.torus import (
    Cone,
    hit_test_volume,
    in_cone,
    torus_distance,
    unit_ball_volume,
    wrap_point,
)

coords = st.floats(min_value=-50.0, max_value=50.0, allow_nan=False)


def test_unit_ball_volumes():
    assert unit_ball_volume(1) == pytest.approx(2.0)
    assert unit_ball_volume(2) == pytest.approx(math.pi)
    assert unit_ball_volume(3) == pytest.approx(4.0 * math.pi / 3.0)
    assert unit_ball_volume(4) == pytest.approx(math.pi**2 / 2.0)


def test_wrap_point():
    assert wrap_point((10.5,), 10.0) == (0.5,)
    assert wrap_point((-0.25, 3.0), 10.0) == (9.75, 3.0)


def test_distance_short_way_around():
    # 9.5 and 0.5 are one unit apart on a circle of circumference 10
    assert torus_distance((9.5,), (0.5,), 10.0) == pytest.approx(1.0)
    assert torus_distance((1.0, 1.0), (9.0, 1.0), 10.0) == pytest.approx(2.0)


@given(st.lists(coords, min_size=1, max_size=3), st.lists(coords, min_size=1, max_size=3))
def test_distance_symmetric_and_bounded(a, b):
    n = min(len(a), len(b))
    x, y = tuple(a[:n]), tuple(b[:n])
    L = 100.0
    dxy = torus_distance(x, y, L)
    assert dxy == torus_distance(y, x, L)
    assert 0.0 <= dxy <= math.sqrt(n) * L / 2.0 * (1 + 1e-12)


@given(st.lists(coords, min_size=2, max_size=2), st.lists(coords, min_size=2, max_size=2),
       st.lists(coords, min_size=2, max_size=2))
def test_triangle_inequality(a, b, c):
    L = 100.0
    x, y, z = tuple(a), tuple(b), tuple(c)
    assert torus_distance(x, z, L) <= (
        torus_distance(x, y, L) + torus_distance(y, z, L) + 1e-9
    )


@given(st.lists(coords, min_size=1, max_size=3))
def test_wrap_is_idempotent_and_in_box(a):
    L = 7.5
    w = wrap_point(tuple(a), L)
    assert all(0.0 <= c < L for c in w)
    assert wrap_point(w, L) == w


def test_in_cone_examples():
    cone = Cone(apex=(0.0,), start_time=0.0, speed=1.0)
    assert in_cone((0.5,), 0.6, cone, side=10.0)
    assert not in_cone((0.5,), 0.4, cone, side=10.0)
    # before the cone starts there is nothing to be inside of
    assert not in_cone((0.0,), -0.1, Cone((0.0,), 0.0, 1.0), side=10.0)
    # boundary counts as inside
    assert in_cone((0.5,), 0.5, cone, side=10.0)


def test_in_cone_wraps_around():
    cone = Cone(apex=(9.9,), start_time=0.0, speed=1.0)
    assert in_cone((0.1,), 0.25, cone, side=10.0)


def test_hit_test_volume_empty_is_zero_and_consumes_nothing():
    rng = Xoshiro256PP(3)
    before = rng.getstate()
    est, se = hit_test_volume([], t=1.0, alpha=1.0, side=10.0, n_samples=100, rng=rng)
    assert est == 0.0 and se == 0.0
    assert rng.getstate() == before


def test_hit_test_volume_full_coverage():
    # a single old event whose ball has wrapped the whole torus
    events = [(0.0, np.array([5.0]))]
    rng = Xoshiro256PP(3)
    est, se = hit_test_volume(events, t=100.0, alpha=1.0, side=10.0, n_samples=500, rng=rng)
    assert est == pytest.approx(10.0)
    assert se == 0.0


def test_hit_test_volume_half_interval():
    # radius 2.5 on a length-10 circle covers half of it
    events = [(0.0, np.array([5.0]))]
    rng = Xoshiro256PP(12)
    est, _ = hit_test_volume(events, t=2.5, alpha=1.0, side=10.0, n_samples=20000, rng=rng)
    assert est == pytest.approx(5.0, rel=0.05)
