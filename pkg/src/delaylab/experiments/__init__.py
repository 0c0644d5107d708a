"""Probes built on the integrator: semicycles, envelopes, convergence, comparison, counterexamples."""

from .comparison import (ComparisonSuite, DecayProbe, comparison_suite, compare_to_myshkis,
                         decay_bound, decay_sweep, random_comparison)
from .convergence import (ConvergenceReport, conjecture_probe, convergence_probe, perturbed_family,
                          plus_spec, shift_spec, summable_perturbations)
from .counterexamples import KINDS, CounterexampleReport, counterexample, slow_phase, tau2
from .envelope import EnvelopeReport, envelope_bounds
from .semicycles import LABELS, SemicycleReport, classify, classify_alpha, semicycles

__all__ = [
    "ComparisonSuite", "DecayProbe", "comparison_suite", "compare_to_myshkis", "decay_bound",
    "decay_sweep", "random_comparison", "ConvergenceReport", "conjecture_probe",
    "convergence_probe", "perturbed_family", "plus_spec", "shift_spec", "summable_perturbations",
    "KINDS", "CounterexampleReport", "counterexample", "slow_phase", "tau2", "EnvelopeReport",
    "envelope_bounds", "LABELS", "SemicycleReport", "classify", "classify_alpha", "semicycles",
]
