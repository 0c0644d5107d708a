import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from delaylab.dde import DdeSpec, DelayFn, integrate
from delaylab.errors import DomainError
from delaylab.myshkis import myshkis_solution, phi_errors, phi_iteration, rho, rho_asymptotics
from delaylab.piecewise import PiecewiseFn

mp.mp.dps = 40

# first roots from the alternating-series oracle below (mpmath, 40 digits)
RHO_ORACLE = {
    0.4: 2.551535033184882,
    0.5: 1.3700394750525634,
    0.75: 1.0428932188134525,
    0.9: 1.0055728090000841,
}


def series(tau, t):
    """x_tau(t) as the finite alternating sum over delay intervals."""
    tau, t = mp.mpf(tau), mp.mpf(t)
    top = int(mp.floor(t / tau)) + 1
    return mp.fsum((-1) ** k * (t - (k - 1) * tau) ** k / mp.factorial(k)
                   for k in range(top + 1) if t - (k - 1) * tau >= 0)


def test_half_delay_value_at_one():
    assert myshkis_solution(0.5)(1.0) == pytest.approx(0.125, abs=1e-15)


@pytest.mark.parametrize("tau", [0.4, 0.5, 0.75, 0.9, 1.3])
def test_matches_series_oracle(tau):
    rec = myshkis_solution(tau)
    t = np.linspace(0.0, rec.rho + tau, 37)
    want = np.array([float(series(tau, s)) for s in t])
    np.testing.assert_allclose(rec(t), want, atol=1e-13)


@pytest.mark.parametrize("tau,want", sorted(RHO_ORACLE.items()))
def test_first_root_frozen(tau, want):
    assert rho(tau) == pytest.approx(want, abs=1e-13)


@pytest.mark.parametrize("tau", [1.0, 1.3, 2.0, 7.5])
def test_root_is_one_for_long_delays(tau):
    assert rho(tau) == 1.0


def test_agrees_with_integrator():
    tau = 0.6
    spec = DdeSpec(PiecewiseFn.constant(0.0, 3.0, -1.0), DelayFn.lag(0.0, 3.0, tau), 0.0,
                   PiecewiseFn.constant(-tau, 0.0, 1.0))
    x = integrate(spec, 3.0)
    rec = myshkis_solution(tau)
    t = np.linspace(0.0, rec.rho, 200)
    np.testing.assert_allclose(x(t), rec(t), atol=1e-13)


def test_rejects_subcritical_delay():
    with pytest.raises(DomainError):
        rho(0.3)


def test_record_serializes():
    d = myshkis_solution(0.5).to_dict()
    assert d["rho"] == rho(0.5)
    assert d["x_tau"]


def test_first_iterate_is_min_of_line_and_one():
    tau = 0.5
    r = rho(tau)
    phi1 = phi_iteration(tau, 1)[1]
    t = np.linspace(0.0, r, 301)
    np.testing.assert_allclose(phi1(t), np.minimum(r - t, 1.0), atol=1e-13)


def test_iterates_stay_above_myshkis():
    tau = 0.5
    rec = myshkis_solution(tau)
    t = np.linspace(0.0, rec.rho, 401)
    prev = None
    for phi in phi_iteration(tau, 8):
        v = phi(t)
        assert np.all(v >= rec(t) - 1e-12)
        if prev is not None:
            assert np.all(v <= prev + 1e-12)
        prev = v


@pytest.mark.parametrize("tau", [0.5, 1.0])
def test_iteration_converges(tau):
    errs = phi_errors(tau, 60)
    # at tau = 1 the first iterate already equals x_tau; an exact zero cannot drop further
    live = errs[errs > 0]
    assert np.all(np.diff(live) < 0)
    assert np.all(errs[len(live):] == 0)
    assert errs[-1] <= 1e-6


def test_unit_delay_is_reached_in_one_step():
    errs = phi_errors(1.0, 3)
    assert errs[0] == 1.0
    assert np.all(errs[1:] == 0.0)


def test_root_decreasing_on_grid():
    taus = np.linspace(1.0 / math.e + 0.01, 1.0, 40)
    r = np.array([rho(t) for t in taus])
    assert np.all(np.diff(r) < 0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.38, 0.99), st.floats(1e-4, 0.02))
def test_root_strictly_decreasing(a, h):
    b = min(a + h, 1.0)
    if b <= a:
        return
    assert rho(b) < rho(a)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.4, 0.99), st.floats(1e-5, 1e-3))
def test_root_is_locally_lipschitz(a, h):
    # away from 1/e the slope of rho stays moderate
    assert abs(rho(a + h) - rho(a)) <= 60.0 * h


def test_asymptotic_ladder_is_reported():
    rep = rho_asymptotics()
    assert len(rep.values) == 3
    assert rep.limit == pytest.approx(0.4953, abs=1e-3)
