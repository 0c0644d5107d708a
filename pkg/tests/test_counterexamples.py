import math

import numpy as np
import pytest

from delaylab.dde import residual
from delaylab.errors import DomainError
from delaylab.experiments import counterexample, slow_phase, tau2
from delaylab.experiments.counterexamples import slow_phase_times, tau2_times


def test_slow_phase_three_blocks():
    _, _, rep = slow_phase(3)
    assert rep.amplitudes[-1] == pytest.approx(0.5 * 0.875 * 17 / 18, abs=1e-15)
    np.testing.assert_allclose(rep.phase_drift, [1.0, 1.5], atol=1e-12)


def test_slow_phase_partial_products_and_drift():
    x, spec, rep = slow_phase(200)
    assert rep.amplitude_error <= 1e-12
    assert rep.drift_error <= 1e-9
    assert rep.witness >= 0.05
    t = np.linspace(slow_phase_times(200)[0], slow_phase_times(200)[-1], 20001)
    assert residual(x, spec, t) <= 1e-9


def test_slow_phase_limit_extrapolates_to_infinite_product():
    _, _, rep = slow_phase(2000)
    target = math.sin(math.pi / math.sqrt(2)) / (math.pi / math.sqrt(2))
    assert rep.extras["infinite_product"] == pytest.approx(target, abs=0)
    assert rep.extras["richardson_limit"] == pytest.approx(target, abs=1e-7)
    # the partial product sits above the limit by roughly 1/(2m)
    assert rep.final_amplitude - target == pytest.approx(target / (2 * 2000), rel=0.05)


def test_tau2_amplitudes_and_witness():
    x, spec, rep = tau2(10, blocks=300)
    assert rep.amplitude_error <= 1e-12
    assert rep.drift_error <= 1e-9
    assert rep.witness >= 0.05
    assert spec.tau_m == pytest.approx(2.0, abs=1e-12)
    t = tau2_times(10, 300)
    assert np.all(np.diff(t) > 2.0)


def test_dispatch_and_domain():
    assert counterexample("tau2", 4, blocks=20)[2].kind == "tau2"
    with pytest.raises(DomainError):
        counterexample("tau2", 3)
    with pytest.raises(DomainError):
        counterexample("slow_phase", 1)
    with pytest.raises(DomainError):
        counterexample("spiral", 5)
