import math

import numpy as np
import pytest

from delaylab.errors import ConstructionError, DomainError
from delaylab.experiments import (compare_to_myshkis, comparison_suite, decay_bound, decay_sweep,
                                  random_comparison)
from delaylab.myshkis import myshkis_solution


def test_myshkis_compares_with_itself():
    rec = myshkis_solution(0.7)
    chk = compare_to_myshkis(rec.x_tau, 0.7)
    assert chk.ok
    assert abs(chk.max_excess) <= 1e-15 and abs(chk.min_gap) <= 1e-15


def test_larger_function_fails_the_order():
    rec = myshkis_solution(0.7)
    chk = compare_to_myshkis(rec.x_tau, 0.7, scale=0.9)
    assert not chk.ok
    assert chk.max_excess > 0.05


def test_random_comparison_is_admissible_and_seeded():
    a = random_comparison(0.8, np.random.default_rng(3))
    b = random_comparison(0.8, np.random.default_rng(3))
    assert a.root == b.root and a.scale == b.scale
    assert a.root >= myshkis_solution(0.8).rho
    assert a.check.ok
    assert a.envelope.violations == 0 and a.envelope.zeros_checked == 1


@pytest.mark.parametrize("tau", [0.5, 1.0])
def test_small_suite_has_no_violations(tau):
    suite = comparison_suite(tau, count=12, seed=11)
    assert suite.failures == 0
    assert suite.worst_excess <= 1e-12
    assert suite.envelope.violations == 0
    assert suite.to_dict()["count"] == 12


def test_decay_with_zero_delta_is_myshkis():
    p = decay_bound(0.9, 0.0)
    np.testing.assert_array_equal(p.a_values, 0.0)
    assert p.C == 0.0 and p.eps == 0.0


def test_decay_square_root_law():
    probes = decay_sweep(0.9)
    assert [p.delta for p in probes] == [1e-2, 1e-3, 1e-4]
    for p in probes:
        assert p.exponent == 0.5
        assert p.nonincreasing and p.nonnegative
        head = p.t <= p.extras["rho"] - 0.9
        assert np.all(p.a_values[head] <= p.bound * (1 + 1e-12))
        assert p.extras["a_rho_minus_tau"] == pytest.approx(p.delta, rel=1e-8)
        assert abs(p.extras["y_rho"]) <= 1e-12
    cs = [p.C for p in probes]
    assert max(cs) / min(cs) <= 3.0
    # a(0) ~ delta + 2 sqrt(delta (1 - rho + tau)) from the first-order analysis
    rho = probes[0].extras["rho"]
    for p in probes:
        want = p.delta + 2 * math.sqrt(p.delta * (1 - rho + 0.9))
        assert p.a0 == pytest.approx(want, rel=0.05)


def test_decay_exponent_for_short_delay():
    p = decay_bound(0.5, 1e-3)
    assert p.extras["floor_rho_over_tau"] == 2
    assert p.exponent == 0.25
    assert p.nonincreasing


def test_decay_domain():
    with pytest.raises(DomainError):
        decay_bound(1.2, 1e-3)
    with pytest.raises(DomainError):
        decay_bound(0.9, 1.5)
    with pytest.raises(ConstructionError):
        decay_bound(0.9, 0.9)


def test_decay_report_fields():
    d = decay_bound(0.9, 1e-3).to_dict()
    assert {"tau", "delta", "exponent", "C", "bound", "eps", "a0"} <= set(d)
