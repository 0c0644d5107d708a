import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from delaylab.periodic import build_minus, build_plus
from delaylab.piecewise import (DomainError, Periodicity, PiecewiseFn, Segment, Trajectory,
                                eval_fn, find_roots, from_csv, integrate_segmentwise, to_csv)


def one_minus_t(a=0.0, b=2.0):
    return PiecewiseFn([Segment.affine(a, b, 1.0, -1.0)])


def test_minus_values():
    m = build_minus().fn
    assert eval_fn(m, 0.0) == pytest.approx(1.0, abs=1e-15)
    assert eval_fn(m, 2.5) == pytest.approx(-1.0, abs=1e-14)


def test_affine_root_value():
    assert eval_fn(one_minus_t(), 1.0) == 0.0


def test_out_of_domain_raises():
    with pytest.raises(DomainError):
        eval_fn(one_minus_t(0.0, 1.0), 1.5)


def test_segment_validation():
    with pytest.raises(ValueError):
        Segment.constant(1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        Segment(0.0, 1.0, [(0.0, [math.nan])])
    with pytest.raises(ValueError):
        Segment.polynomial(0.0, 1.0, [])


@pytest.mark.parametrize("f, a, b, expected", [
    (one_minus_t(0.0, 1.0), 0.0, 1.0, 0.5),
    (PiecewiseFn([Segment.exponential(0.0, 1.0, 1.0)]), 0.0, math.log(2.0), 1.0),
    (one_minus_t(), 0.7, 0.7, 0.0),
])
def test_integrals(f, a, b, expected):
    assert integrate_segmentwise(f, a, b) == pytest.approx(expected, abs=1e-15)


def test_roots_minus():
    rs = find_roots(build_minus().fn, 0.0, 4.0)
    np.testing.assert_allclose(rs.points, [1.0, 3.5], atol=1e-12)


def test_roots_simple_cases():
    np.testing.assert_allclose(find_roots(one_minus_t(), 0.0, 2.0).points, [1.0], atol=1e-15)
    assert len(find_roots(PiecewiseFn.constant(0.0, 1.0, 1.0), 0.0, 1.0)) == 0


def test_identically_zero_is_flagged():
    rs = find_roots(PiecewiseFn.constant(0.0, 1.0, 0.0), 0.0, 1.0)
    assert rs.degenerate or rs.zero_intervals


def test_zero_stretch_reported_as_interval():
    f = PiecewiseFn([Segment.affine(0.0, 1.0, 1.0, -1.0), Segment.constant(1.0, 2.0, 0.0),
                     Segment.affine(2.0, 3.0, 2.0, -1.0)])
    rs = find_roots(f, 0.0, 3.0)
    assert rs.zero_intervals and rs.zero_intervals[0] == pytest.approx((1.0, 2.0))


def test_csv_round_trip():
    f = build_plus().fn
    grid = np.linspace(0.0, 3.0, 31)
    back = from_csv(to_csv(f, grid))
    np.testing.assert_array_equal(back.grid, grid)
    np.testing.assert_allclose(back(grid), f(grid), rtol=0, atol=0)


def test_json_round_trip():
    f = build_plus().fn
    g = PiecewiseFn.from_json(f.to_json())
    t = np.linspace(-5.0, 5.0, 101)
    np.testing.assert_array_equal(f(t), g(t))


def test_slow_exponential_primitive_is_accurate():
    # P e^{r u} with tiny r: the closed-form primitive would cancel
    for r in (1e-9, 1e-4, 0.3):
        seg = Segment(0.0, 0.9, [(r, [1.0, 2.0, -3.0, 0.5])]).antiderivative(0.7)
        u = np.linspace(0.0, 0.9, 20001)
        f = (1 + 2 * u - 3 * u ** 2 + 0.5 * u ** 3) * np.exp(r * u)
        ref = 0.7 + np.sum((f[1:] + f[:-1]) * np.diff(u)) / 2
        assert seg.value_at_right() == pytest.approx(ref, abs=1e-8)


def test_grid_trajectory_interpolates():
    t = np.linspace(0.0, 1.0, 11)
    tr = Trajectory(t, 2 * t)
    assert tr(0.55) == pytest.approx(1.1)


# -- properties ----------------------------------------------------------------

@st.composite
def continuous_fn(draw):
    n = draw(st.integers(1, 6))
    knots = np.cumsum([0.0] + draw(st.lists(st.floats(0.1, 1.0), min_size=n, max_size=n)))
    vals = draw(st.lists(st.floats(-2.0, 2.0), min_size=n + 1, max_size=n + 1))
    segs = []
    for i in range(n):
        a, b = knots[i], knots[i + 1]
        s = (vals[i + 1] - vals[i]) / (b - a)
        segs.append(Segment.affine(a, b, vals[i] - s * a, s))
    return PiecewiseFn(segs)


@settings(max_examples=60, deadline=None)
@given(continuous_fn())
def test_breakpoint_consistency(f):
    for a, b in zip(f.segments, f.segments[1:]):
        assert abs(a(a.right) - b(b.left)) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(continuous_fn(), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_integral_additive(f, u, v, w):
    a, b, c = np.sort(f.start + (f.end - f.start) * np.array([u, v, w]))
    lhs = integrate_segmentwise(f, a, b) + integrate_segmentwise(f, b, c)
    assert lhs == pytest.approx(integrate_segmentwise(f, a, c), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-50.0, 50.0), min_size=100, max_size=100))
def test_periodic_reduction_exact(ts):
    for sol in (build_minus(), build_plus()):
        f = sol.fn
        P, s = f.periodicity.period, f.periodicity.sign
        t = np.array(ts)
        np.testing.assert_allclose(f(t + P), s * f(t), atol=1e-12, rtol=0)


@settings(max_examples=40, deadline=None)
@given(continuous_fn(), st.floats(1e-3, 1e3))
def test_roots_invariant_under_positive_scaling(f, c):
    r1 = find_roots(f, f.start, f.end).points
    r2 = find_roots(f.scaled(c), f.start, f.end).points
    assert len(r1) == len(r2)
    np.testing.assert_allclose(r1, r2, atol=1e-10)


def test_roots_of_a_decaying_tail_are_judged_locally():
    # the solution decays by about twenty orders; that of decay must not turn the tail into a zero interval
    from delaylab.dde import DdeSpec, DelayFn, integrate
    spec = DdeSpec(PiecewiseFn.constant(0.0, 30.0, -1.0), DelayFn.lag(0.0, 30.0, 0.45), 0.0,
                   PiecewiseFn.constant(-0.45, 0.0, 1.0))
    exact = find_roots(integrate(spec, 30.0), 0.0, 30.0)
    grid = find_roots(integrate(spec, 30.0, exact=False, step=1e-3), 0.0, 30.0)
    assert exact.zero_intervals == [] and grid.zero_intervals == []
    assert len(exact.points) == len(grid.points) == 13
    np.testing.assert_allclose(exact.points, grid.points, atol=1e-5)
