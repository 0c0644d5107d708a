"""Exact method-of-steps solutions of x'(t) = p(t) x(tau(t)) and the oscillation thresholds around them."""

from .dde import DdeSpec, DelayFn, integrate, residual
from .errors import (ConstructionError, DomainError, ExactModeError, InvariantError,
                     NotOscillatoryError, NumericError, SpecError, ThresholdError)
from .myshkis import myshkis_solution, phi_iteration, rho
from .normalizer import abs_transform, round_trip, time_rescale
from .periodic import build, build_minus, build_plus, build_varpi, catalog, shift_equivalence, verify
from .piecewise import PiecewiseFn, Segment, Trajectory, find_roots
from .threshold import lambda_, lambda_closed_form, psi_and_xi, spectral

__version__ = "0.1.0"

__all__ = [
    "DdeSpec", "DelayFn", "integrate", "residual",
    "ConstructionError", "DomainError", "ExactModeError", "InvariantError", "NotOscillatoryError",
    "NumericError", "SpecError", "ThresholdError",
    "myshkis_solution", "phi_iteration", "rho", "abs_transform", "round_trip", "time_rescale",
    "build", "build_minus", "build_plus", "build_varpi", "catalog", "shift_equivalence", "verify",
    "PiecewiseFn", "Segment", "Trajectory", "find_roots",
    "lambda_", "lambda_closed_form", "psi_and_xi", "spectral",
]
