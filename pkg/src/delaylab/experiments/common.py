"""Sampling, shift fitting and the envelope functions shared by the probes."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from ..myshkis import myshkis_solution
from ..piecewise import PiecewiseFn, Trajectory, _golden_min, eval_fn
from ..threshold import psi_and_xi


def probe_grid(x, a: float, b: float, per_unit: int = 200) -> np.ndarray:
    """Uniform grid on [a, b] merged with the breakpoints of an exact trajectory."""
    n = max(2, int(math.ceil((b - a) * per_unit)) + 1)
    t = np.linspace(a, b, n)
    fn = x.exact if isinstance(x, Trajectory) else x
    if isinstance(fn, PiecewiseFn):
        bp = np.array([s.left for s in fn.segments_between(a, b)])
        bp = bp[(bp > a) & (bp < b)]
        if bp.size:
            t = np.union1d(t, bp)
    return t


def window_max(x, a: float, b: float, per_unit: int = 400) -> tuple[float, float]:
    """max |x| on [a, b] (grid search refined by golden section); returns (time, value)."""
    t = probe_grid(x, a, b, per_unit)
    v = np.abs(eval_fn(x, t))
    i = int(np.argmax(v))
    lo, hi = t[max(i - 1, 0)], t[min(i + 1, len(t) - 1)]
    if hi > lo:
        tm, fm = _golden_min(lambda s: -abs(float(eval_fn(x, s))), lo, hi, iters=60)
        if -fm > v[i]:
            return float(tm), float(-fm)
    return float(t[i]), float(v[i])


def fit_shift(values: np.ndarray, t: np.ndarray, ref, scale: float, period: float,
              scan: int = 400, coarse_points: int = 2000) -> tuple[float, float]:
    """Shift s in [0, period) minimizing max |values - scale * ref(t + s)|.

    A coarse scan over a fixed pseudo-random subsample (a regular stride could
    alias with the period) picks the basin; golden-section search on the full
    sample refines it.  Returns (s, achieved distance).
    """
    if len(t) > coarse_points:
        pick = np.sort(np.random.default_rng(0).choice(len(t), coarse_points, replace=False))
        tc, vc = t[pick], values[pick]
    else:
        tc, vc = t, values

    def dist_on(tt, vv, s):
        return float(np.max(np.abs(vv - scale * eval_fn(ref, tt + s))))

    shifts = np.arange(scan) * (period / scan)
    coarse = np.array([dist_on(tc, vc, s) for s in shifts])
    step = period / scan
    best_s, best_d = 0.0, math.inf
    # refine the few best basins; the sup-distance can have near-ties
    for i in np.argsort(coarse)[:3]:
        s, d = _golden_min(lambda s: dist_on(t, values, s), shifts[i] - step, shifts[i] + step, iters=90)
        d_grid = dist_on(t, values, shifts[i])
        if d_grid < d:
            s, d = shifts[i], d_grid
        if d < best_d:
            best_s, best_d = s, d
    s = float(best_s % period)
    if period - s < 1e-9 * period:
        s = 0.0  # wrapped rounding of a zero shift
    return s, float(best_d)


class GrowthEnvelope:
    """psi_tau on [0, inf): exact pieces up to its stored end, exponential beyond."""

    def __init__(self, tau: float):
        rec = psi_and_xi(tau)
        self.tau = tau
        self.rho = rec.rho
        self.lam = rec.lam
        self._fn = rec.psi.exact
        self._end = self._fn.end
        self._at_end = float(self._fn(self._end))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        inside = np.clip(t, 0.0, self._end)
        out = self._fn(inside)
        beyond = t > self._end
        if np.any(beyond):
            out = np.where(beyond, self._at_end * np.exp(t - self._end), out)
        return out


@lru_cache(maxsize=64)
def growth_envelope(tau: float) -> GrowthEnvelope:
    return GrowthEnvelope(float(tau))


def descent_envelope(tau: float):
    """s -> x_tau(rho - s) for s in [0, tau]: the bound before a zero."""
    rec = myshkis_solution(float(tau))

    def f(s):
        return rec.x_tau(rec.rho - np.asarray(s, dtype=float))
    return f
