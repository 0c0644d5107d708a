"""Amplitude bounds around a zero: the window-max bound and the psi / x_tau envelope.

For a zero t0 let M0 be the max of |x| over [t0 - tau_m - rho(tau_m), t0].  Then

* |x(t)| <= M0 for t >= t0 (oscillating solutions up to the critical length),
* |x(t)| <= M0 psi(t - t0) for t >= t0,
* |x(t)| <= M0 x_tau(rho - (t0 - t)) for t in [t0 - tau_m, t0].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..myshkis import myshkis_solution
from ..numerics import check_tau
from ..piecewise import PiecewiseFn, Trajectory, _golden_min, eval_fn, find_roots
from .common import descent_envelope, growth_envelope, probe_grid

REL_TOL = 1e-9


@dataclass
class EnvelopeReport:
    tau_m: float
    zeros_checked: int = 0
    probes: int = 0
    max_violations: int = 0      # |x| > M0 after the zero
    forward_violations: int = 0  # |x| > M0 psi(t - t0)
    backward_violations: int = 0  # |x| > M0 x_tau(rho - (t0 - t))
    worst_ratio: float = 0.0     # largest |x| / bound seen
    failures: list = field(default_factory=list)

    @property
    def violations(self) -> int:
        return self.max_violations + self.forward_violations + self.backward_violations

    def merge(self, other: "EnvelopeReport") -> "EnvelopeReport":
        self.zeros_checked += other.zeros_checked
        self.probes += other.probes
        self.max_violations += other.max_violations
        self.forward_violations += other.forward_violations
        self.backward_violations += other.backward_violations
        self.worst_ratio = max(self.worst_ratio, other.worst_ratio)
        self.failures += other.failures
        return self

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["violations"] = self.violations
        return d


def envelope_bounds(x, tau_m: float, window, zeros=None, check_max: bool = True,
                    per_unit: int = 200, rel_tol: float = REL_TOL) -> EnvelopeReport:
    """Check the three bounds at every zero inside ``window`` on a dense probe grid.

    ``check_max`` turns on the window-max bound, whose hypothesis is an
    oscillating solution with semicycles no longer than the critical length.
    Zeros whose look-back window leaves the trajectory span are skipped.
    """
    tau_m = check_tau(tau_m, upper=2.0)
    rho = myshkis_solution(tau_m).rho
    psi = growth_envelope(tau_m)
    xt = descent_envelope(tau_m)
    a, b = float(window[0]), float(window[1])
    lo_span = x.span[0] if hasattr(x, "span") else a
    if zeros is None:
        zeros = find_roots(x, a, b).points
    look = tau_m + rho
    t = probe_grid(x, max(lo_span, a - look), b, per_unit)
    v = np.abs(eval_fn(x, t))
    is_bp = _breakpoint_mask(x, t)
    # suffix maxima give sup_{s >= t} |x(s)| in O(1) per zero
    suffix = np.maximum.accumulate(v[::-1])[::-1]
    horizon = psi.lam - psi.rho  # past this psi >= 1 and the max bound is stronger
    rep = EnvelopeReport(tau_m)
    for t0 in zeros:
        if t0 - look < lo_span - 1e-12 or t0 > b:
            continue
        i0, i1 = np.searchsorted(t, [t0 - look, t0], side="left")
        M0 = _refined_max(x, t, v, is_bp, i0, i1 + 1)
        if M0 <= 0.0:
            continue
        tol = rel_tol * M0
        rep.zeros_checked += 1
        j0 = np.searchsorted(t, t0, side="left")
        if check_max and j0 < len(t):
            rep.probes += 1
            if suffix[j0] > M0 + tol:
                rep.max_violations += 1
                rep.failures.append(("max", float(t0), float(suffix[j0]), M0))
            rep.worst_ratio = max(rep.worst_ratio, suffix[j0] / M0)
        j1 = np.searchsorted(t, t0 + horizon, side="right")
        tf, vf = t[j0:j1], v[j0:j1]
        if tf.size:
            bound = M0 * psi(tf - t0)
            bad = vf > bound + tol
            rep.probes += tf.size
            if np.any(bad):
                rep.forward_violations += int(bad.sum())
                k = int(np.argmax(vf - bound))
                rep.failures.append(("psi", float(t0), float(tf[k]), float(vf[k]), float(bound[k])))
            pos = bound > 1e-3 * M0  # ratios right at the zero are rounding noise
            if np.any(pos):
                rep.worst_ratio = max(rep.worst_ratio, float(np.max(vf[pos] / bound[pos])))
        k0 = np.searchsorted(t, t0 - tau_m, side="left")
        tb, vb = t[k0:j0], v[k0:j0]
        if tb.size:
            bound = M0 * xt(t0 - tb)
            bad = vb > bound + tol
            rep.probes += tb.size
            if np.any(bad):
                rep.backward_violations += int(bad.sum())
                k = int(np.argmax(vb - bound))
                rep.failures.append(("x_tau", float(t0), float(tb[k]), float(vb[k]), float(bound[k])))
    return rep


def _breakpoint_mask(x, t: np.ndarray) -> np.ndarray:
    fn = x.exact if isinstance(x, Trajectory) else x
    if not isinstance(fn, PiecewiseFn):
        return np.zeros(t.shape, dtype=bool)
    bp = np.array([s.left for s in fn.segments_between(t[0], t[-1])])
    return np.isin(t, bp)


def _refined_max(x, t, v, is_bp, i0: int, i1: int) -> float:
    """max |x| over t[i0:i1], polished by golden section unless it sits on a breakpoint."""
    if i1 <= i0:
        return 0.0
    i = i0 + int(np.argmax(v[i0:i1]))
    best = float(v[i])
    if is_bp[i] or i == 0 or i == len(t) - 1:
        return best
    _, fm = _golden_min(lambda s: -abs(float(eval_fn(x, s))), t[i - 1], t[i + 1], iters=60)
    return max(best, -fm)
