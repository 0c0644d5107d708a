import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from delaylab.dde import DdeSpec, DelayFn, integrate, residual
from delaylab.errors import InvariantError, SpecError
from delaylab.periodic import build_minus, build_varpi
from delaylab.piecewise import PiecewiseFn, Segment, Trajectory


def lag_spec(p=-1.0, lag=0.5, end=5.0, hist=1.0):
    return DdeSpec(PiecewiseFn.constant(0.0, end, p), DelayFn.lag(0.0, end, lag), 0.0,
                   PiecewiseFn.constant(-lag, 0.0, hist), normalized=abs(p) <= 1)


def test_first_step_is_linear():
    x = integrate(lag_spec(), 0.5)
    t = np.linspace(0.0, 0.5, 11)
    np.testing.assert_allclose(x(t), 1.0 - t, atol=1e-15)
    assert x(0.5) == pytest.approx(0.5, abs=1e-15)


def test_identity_delay_is_exponential():
    spec = DdeSpec(PiecewiseFn.constant(0.0, 1.0, 1.0), DelayFn.identity(0.0, 1.0), 0.0,
                   PiecewiseFn.constant(-1.0, 0.0, 1.0))
    x = integrate(spec, 1.0)
    assert x(math.log(2.0)) == pytest.approx(2.0, abs=1e-14)


def test_varpi2_reproduces_itself():
    sol = build_varpi(2.0)
    x = integrate(sol.spec, 6.0)
    t = np.linspace(0.0, 6.0, 6001)
    assert np.max(np.abs(x(t) - sol(t))) <= 1e-9


def test_residual_of_minus():
    m = build_minus()
    assert residual(m.solution, m.spec, np.linspace(0.0, 10.0, 5001)) <= 1e-9


def test_residual_detects_broken_segment():
    m = build_minus()
    base = m.fn.unrolled(-3.0, 5.0)
    segs = [s.scaled(1.1) if s.left <= 2.0 < s.right else s for s in base.segments]
    broken = Trajectory(exact=PiecewiseFn(segs, gap_tol=1.0))
    assert residual(broken, m.spec, np.linspace(0.0, 5.0, 5001)) > 0.05


def test_residual_of_zero_is_zero():
    spec = lag_spec(hist=0.0)
    zero = Trajectory(exact=PiecewiseFn.constant(-0.5, 5.0, 0.0))
    assert residual(zero, spec, np.linspace(0.0, 5.0, 101)) == 0.0


def test_future_delay_is_rejected():
    spec = DdeSpec(PiecewiseFn.constant(0.0, 2.0, -1.0), DelayFn.from_pieces([(0.0, 2.0, 0.5, 1.0)]),
                   0.0, PiecewiseFn.constant(-1.0, 0.0, 1.0))
    with pytest.raises(InvariantError):
        integrate(spec, 2.0)


def test_delay_before_history_is_rejected():
    spec = DdeSpec(PiecewiseFn.constant(0.0, 2.0, -1.0), DelayFn.lag(0.0, 2.0, 1.0), 0.0,
                   PiecewiseFn.constant(-0.5, 0.0, 1.0))
    with pytest.raises(SpecError):
        integrate(spec, 2.0)


def test_normalized_flag_checks_coefficient():
    with pytest.raises(SpecError):
        lag_spec(p=-1.5).__class__(PiecewiseFn.constant(0.0, 1.0, -1.5), DelayFn.lag(0.0, 1.0, 0.5),
                                   0.0, PiecewiseFn.constant(-0.5, 0.0, 1.0), normalized=True)


def test_spec_json_round_trip():
    spec = build_varpi(1.2).spec
    back = DdeSpec.from_json(spec.to_json())
    a, b = integrate(spec, 8.0), integrate(back, 8.0)
    t = np.linspace(0.0, 8.0, 801)
    np.testing.assert_array_equal(a(t), b(t))


def test_zero_plateau_keeps_value():
    p = PiecewiseFn([Segment.constant(0.0, 1.0, -1.0), Segment.constant(1.0, 2.0, 0.0),
                     Segment.constant(2.0, 3.0, -1.0)])
    spec = DdeSpec(p, DelayFn.lag(0.0, 3.0, 0.5), 0.0, PiecewiseFn.constant(-0.5, 0.0, 1.0))
    x = integrate(spec, 3.0)
    np.testing.assert_allclose(x(np.linspace(1.0, 2.0, 11)), x(1.0), atol=1e-15)


def test_grid_mode_converges_at_second_order():
    spec = lag_spec(p=-0.8, lag=0.7, end=3.0)
    exact = integrate(spec, 3.0)(3.0)
    errs = [abs(integrate(spec, 3.0, step=h, exact=False)(3.0) - exact) for h in (0.04, 0.02, 0.01, 0.005)]
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all((ratios >= 2.5) & (ratios <= 6.0)), ratios


def test_restart_matches_direct_run():
    spec = build_varpi(0.8).spec
    full = integrate(spec, 6.0)
    mid = 2.5
    hist = full.exact.unrolled(mid - spec.tau_m - 1.0, mid)
    restart = integrate(spec.with_history(hist, t0=mid), 6.0)
    t = np.linspace(mid, 6.0, 701)
    assert np.max(np.abs(restart(t) - full(t))) <= 1e-10


@settings(max_examples=25, deadline=None)
@given(st.floats(-1.0, 1.0), st.floats(0.05, 2.0), st.sampled_from([-2.0, 0.5]))
def test_linearity_in_history(p, lag, c):
    spec = lag_spec(p=p, lag=lag, end=4.0, hist=1.0)
    x = integrate(spec, 4.0)
    y = integrate(spec.scaled_history(c), 4.0)
    t = np.linspace(0.0, 4.0, 401)
    np.testing.assert_allclose(y(t), c * x(t), atol=1e-10 * max(1.0, np.max(np.abs(x(t)))))


@settings(max_examples=25, deadline=None)
@given(st.floats(-1.0, 1.0), st.one_of(st.just(0.0), st.floats(0.05, 2.0)))
def test_residual_of_output_is_small(p, lag):
    spec = DdeSpec(PiecewiseFn.constant(0.0, 4.0, p), DelayFn.lag(0.0, 4.0, lag), 0.0,
                   PiecewiseFn([Segment.affine(-2.0, 0.0, 1.0, 0.3)]))
    x = integrate(spec, 4.0)
    assert residual(x, spec) <= 1e-8 * max(1.0, float(np.max(np.abs(x(np.linspace(0, 4, 101))))))


def test_tiny_lag_refused_in_exact_mode():
    from delaylab.errors import ExactModeError
    spec = lag_spec(lag=1e-9, end=1.0)
    with pytest.raises(ExactModeError):
        integrate(spec, 1.0)
    # grid mode still runs; a lag below the step reads the latest sample (first order)
    x = integrate(spec, 1.0, exact=False, step=1e-3)
    assert x(1.0) == pytest.approx(math.exp(-1.0), rel=1e-3)
