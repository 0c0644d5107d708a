import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from delaylab.dde import DdeSpec, DelayFn, integrate, residual
from delaylab.errors import SpecError
from delaylab.normalizer import abs_transform, round_trip, time_rescale
from delaylab.periodic import build_minus, build_plus
from delaylab.piecewise import PiecewiseFn, Segment
from specgen import random_spec


def const_spec(p, lag=1.0, end=4.0):
    return DdeSpec(PiecewiseFn.constant(0.0, end, p), DelayFn.lag(0.0, end, lag), 0.0,
                   PiecewiseFn.constant(-lag, 0.0, 1.0), normalized=False)


def test_doubling_coefficient_doubles_lag():
    norm, fmap = time_rescale(const_spec(-2.0))
    assert norm.tau_m == pytest.approx(2.0, abs=1e-14)
    assert fmap.to_dict()["slopes"] == [2.0]
    assert norm.p(3.0) == -1.0
    assert fmap.f(1.5) == 3.0
    assert fmap.g(3.0) == 1.5


def test_unit_coefficient_is_identity():
    spec = const_spec(-1.0, lag=0.7)
    norm, fmap = time_rescale(spec)
    t = np.linspace(0.0, 4.0, 17)
    np.testing.assert_array_equal(fmap.f(t), t)
    np.testing.assert_allclose(norm.tau(t), spec.tau(t), atol=1e-15)


def test_plateau_collapses():
    spec = DdeSpec(PiecewiseFn([Segment.constant(0.0, 1.0, -1.0), Segment.constant(1.0, 2.5, 0.0),
                                Segment.constant(2.5, 4.0, -1.0)]),
                   DelayFn.lag(0.0, 4.0, 0.5), 0.0, PiecewiseFn.constant(-0.5, 0.0, 1.0),
                   normalized=True)
    norm, fmap = time_rescale(spec)
    assert fmap.s_knots[-1] == pytest.approx(2.5, abs=1e-15)
    # g picks the left end of the plateau
    assert fmap.g(1.0) == 1.0
    assert fmap.g(1.2) == pytest.approx(2.7, abs=1e-14)
    x = integrate(spec, 4.0)
    np.testing.assert_allclose(x(np.linspace(1.0, 2.5, 7)), x(1.0), atol=1e-15)
    assert round_trip(spec, 4.0).error <= 1e-12


def test_plateau_at_end_rejected():
    spec = DdeSpec(PiecewiseFn([Segment.constant(0.0, 1.0, -1.0), Segment.constant(1.0, 2.0, 0.0)]),
                   DelayFn.lag(0.0, 2.0, 0.5), 0.0, PiecewiseFn.constant(-0.5, 0.0, 1.0))
    with pytest.raises(SpecError):
        time_rescale(spec)


def test_nonconstant_coefficient_rejected():
    spec = DdeSpec(PiecewiseFn([Segment.affine(0.0, 2.0, -0.5, 0.1)]), DelayFn.lag(0.0, 2.0, 0.5),
                   0.0, PiecewiseFn.constant(-0.5, 0.0, 1.0))
    with pytest.raises(SpecError):
        time_rescale(spec)


def test_map_serializes():
    _, fmap = time_rescale(const_spec(-2.0))
    d = json.loads(fmap.to_json())
    assert d == {"breakpoints": [0.0, 4.0], "values": [0.0, 8.0], "slopes": [2.0]}


@pytest.mark.parametrize("seed", range(5))
def test_random_round_trip(seed):
    spec = random_spec(np.random.default_rng(seed))
    rt = round_trip(spec, spec.horizon_end(), seed=seed)
    assert rt.error <= 1e-8
    assert rt.to_dict()["samples"] == rt.samples


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_rescaled_coefficient_has_unit_modulus(seed):
    spec = random_spec(np.random.default_rng(seed))
    norm, fmap = time_rescale(spec, spec.horizon_end())
    vals = np.array([s.constant_value() for s in norm.p.segments])
    np.testing.assert_allclose(np.abs(vals), 1.0, atol=0)
    assert np.all(np.diff(fmap.s_knots) >= 0)
    assert np.all(norm.tau(np.linspace(0.0, fmap.s_knots[-1], 101)) <= np.linspace(0.0, fmap.s_knots[-1], 101) + 1e-12)


def test_abs_of_minus_solves_its_problem():
    m = build_minus()
    a, spec, gaps = abs_transform(m.solution, m.spec, (0.0, 10.0))
    assert residual(a, spec, np.linspace(0.0, 10.0, 4001)) <= 1e-12
    np.testing.assert_allclose(gaps, [1.0, 3.5, 6.0, 8.5], atol=1e-12)
    t = np.linspace(0.0, 10.0, 501)
    np.testing.assert_allclose(a(t), np.abs(m(t)), atol=1e-15)


def test_abs_of_plus_is_nonnegative():
    p = build_plus()
    a, spec, _ = abs_transform(p.solution, p.spec, (0.0, 3 * p.period))
    t = np.linspace(0.0, 3 * p.period, 2001)
    assert np.all(a(t) >= 0)
    assert residual(a, spec, t) <= 1e-12
