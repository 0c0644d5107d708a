import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from delaylab.dde import DdeSpec, DelayFn, integrate
from delaylab.experiments import envelope_bounds
from delaylab.periodic import build_minus, build_varpi
from delaylab.piecewise import PiecewiseFn, Segment


def test_lag_solution_respects_bounds():
    spec = DdeSpec(PiecewiseFn.constant(0.0, 40.0, -1.0), DelayFn.lag(0.0, 40.0, 1.0), 0.0,
                   PiecewiseFn.constant(-1.0, 0.0, 1.0))
    rep = envelope_bounds(integrate(spec, 40.0), 1.0, (0.0, 40.0))
    assert rep.violations == 0
    assert rep.zeros_checked >= 15
    assert rep.probes > 1000


@pytest.mark.parametrize("tau", [0.5, 0.8, 1.5, 2.0])
def test_varpi_is_tight_but_inside(tau):
    v = build_varpi(tau)
    rep = envelope_bounds(v.solution, tau, (0.0, 6 * v.period))
    assert rep.violations == 0
    # the growth envelope is attained on the ascent
    assert rep.worst_ratio == pytest.approx(1.0, abs=1e-6)


def test_minus_inside():
    rep = envelope_bounds(build_minus().solution, 1.5, (0.0, 20.0))
    assert rep.violations == 0 and rep.zeros_checked == 8


def test_fast_growth_is_flagged():
    # sawtooth whose amplitude doubles every semicycle
    segs, t, amp, sign = [], 0.0, 1.0, 1.0
    while t < 12.0:
        segs.append(Segment.affine(t, t + 1.0, -sign * amp * t, sign * amp))
        segs.append(Segment.affine(t + 1.0, t + 2.0, sign * amp * (t + 2.0), -sign * amp))
        t, amp, sign = t + 2.0, 2.0 * amp, -sign
    rep = envelope_bounds(PiecewiseFn(segs), 1.0, (0.0, 12.0))
    assert rep.max_violations > 0
    assert rep.forward_violations > 0
    assert rep.failures


def test_merge_accumulates():
    a = envelope_bounds(build_minus().solution, 1.5, (0.0, 10.0))
    b = envelope_bounds(build_minus().solution, 1.5, (10.0, 20.0))
    n = a.zeros_checked + b.zeros_checked
    a.merge(b)
    assert a.zeros_checked == n
    assert a.to_dict()["violations"] == 0


@settings(max_examples=15, deadline=None)
@given(st.floats(0.45, 2.0), st.floats(-1.0, 1.0))
def test_constant_lag_family(lag, slope):
    hist = PiecewiseFn([Segment.affine(-lag, 0.0, 1.0 - slope * lag, slope)]) if lag > 0 else None
    spec = DdeSpec(PiecewiseFn.constant(0.0, 30.0, -1.0), DelayFn.lag(0.0, 30.0, lag), 0.0, hist)
    x = integrate(spec, 30.0)
    rep = envelope_bounds(x, lag, (0.0, 30.0), check_max=lag < 1.6)
    assert rep.forward_violations == 0
    assert rep.backward_violations == 0
