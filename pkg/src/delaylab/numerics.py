"""Small numeric helpers: extrapolation and threshold constants."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .errors import ThresholdError

INV_E = math.exp(-1.0)
THRESHOLD_GUARD = 1e-6
# limits of the scaled first root and the scaled critical semicycle length
RHO_LIMIT = math.pi / math.sqrt(2.0 * math.e ** 3)
LAMBDA_LIMIT = RHO_LIMIT * (1.0 + INV_E)
XI_LIMIT = 1.0 / (2.0 * math.e)

# default epsilon = tau - 1/e ladder: sqrt(eps) halves at each level
DEFAULT_EPS = (0.016, 0.004, 0.001)


def check_tau(tau: float, upper: float = math.inf) -> float:
    tau = float(tau)
    if not math.isfinite(tau) or tau <= INV_E + THRESHOLD_GUARD:
        raise ThresholdError(f"tau={tau} must exceed 1/e + {THRESHOLD_GUARD:g}")
    if tau > upper:
        raise ThresholdError(f"tau={tau} exceeds the supported maximum {upper}")
    return tau


def richardson(h: Sequence[float], values: Sequence[float]) -> float:
    """Polynomial extrapolation to h = 0 through all (h_i, v_i) (Neville's scheme).

    With h halving and three points this is two Richardson levels for an
    expansion ``L + a h + b h^2 + ...``.
    """
    h = np.asarray(h, dtype=float)
    t = np.asarray(values, dtype=float).copy()
    n = len(h)
    if n == 0 or len(t) != n:
        raise ValueError("need matching, nonempty h and value sequences")
    for level in range(1, n):
        for i in range(n - level):
            j = i + level
            t[i] = (h[j] * t[i] - h[i] * t[i + 1]) / (h[j] - h[i])
    return float(t[0])


def richardson_table(h: Sequence[float], values: Sequence[float]) -> list:
    """Successive extrapolations using the first 1, 2, ... points."""
    return [richardson(h[: k + 1], values[: k + 1]) for k in range(len(h))]
