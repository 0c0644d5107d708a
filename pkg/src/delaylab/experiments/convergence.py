"""Convergence of critical oscillating solutions to a scaled, shifted periodic profile.

``convergence_probe`` integrates a problem, fits ``|x(t)| ~ M varpi_tau(t + eta)``
on the final part of the horizon and reports the fit residual window by window.
``perturbed_family`` builds test problems: the varpi_tau pattern repeated
semicycle by semicycle, with each semicycle shortened and its ascent lag
reduced by prescribed amounts.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..dde import DdeSpec, DelayFn, integrate
from ..errors import ConstructionError, NotOscillatoryError, SpecError
from ..numerics import INV_E, check_tau
from ..periodic import build_plus, build_varpi
from ..piecewise import (DomainError, PiecewiseFn, Segment, Trajectory, _compose_affine, eval_fn,
                         find_roots)
from ..threshold import psi_and_xi
from .common import fit_shift, probe_grid, window_max

FINAL_FRACTION = 0.2
DEFAULT_PERIODS = 200
MIN_PERIODS = 20
TREND_WINDOWS = 5
REL_TOLERANCE = 1e-3
NOISE_FLOOR = 1e-9
# varpi^+ is unstable in its own equation: rounding excites a growing,
# eventually one-signed mode (about 100x per 10 time units), so long runs
# measure rounding rather than dynamics
CONJECTURE_PERIODS = 15


@dataclass
class ConvergenceReport:
    M: float
    eta: float
    residual_by_window: np.ndarray
    window_starts: np.ndarray
    verdict: str
    tau: Optional[float]
    period: float
    horizon: float
    tolerance: float
    signed: bool = False
    local_bound: dict = field(default_factory=dict)
    notes: str = ""

    @property
    def final_residual(self) -> float:
        return float(self.residual_by_window[-1])

    def to_dict(self) -> dict:
        return {"M": self.M, "eta": self.eta, "verdict": self.verdict, "tau": self.tau,
                "period": self.period, "horizon": self.horizon, "tolerance": self.tolerance,
                "final_residual": self.final_residual, "signed": self.signed,
                "window_start": self.window_starts.tolist(),
                "residual_by_window": self.residual_by_window.tolist(),
                "local_bound": self.local_bound, "notes": self.notes}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["window", "start", "residual"])
        for k, (s, r) in enumerate(zip(self.window_starts, self.residual_by_window)):
            w.writerow([k, repr(float(s)), repr(float(r))])
        return buf.getvalue()


def verdict_from(residuals: np.ndarray, M: float, enough: bool,
                 rel_tol: float = REL_TOLERANCE, trend: int = TREND_WINDOWS) -> str:
    if not enough or len(residuals) < trend:
        return "inconclusive"
    tail = residuals[-trend:]
    floor = NOISE_FLOOR * max(M, 1e-300)
    monotone = bool(np.all(np.diff(tail) <= floor))
    if residuals[-1] <= rel_tol * M and monotone:
        return "convergent"
    return "non-convergent"


# -- problem construction ----------------------------------------------------------

def shift_spec(spec: DdeSpec, dt: float) -> DdeSpec:
    """The problem solved by ``t -> x(t - dt)`` when x solves ``spec``."""
    p = spec.p.shifted(-dt)
    d = spec.tau
    pieces = [(q.left + dt, q.right + dt, q.start + dt, q.slope) for q in d._pieces]
    tau = DelayFn.from_pieces(pieces, d.shift_period)
    return DdeSpec(p, tau, spec.t0 + dt, spec.history.shifted(-dt), spec.normalized,
                   (spec.name + f" shifted {dt:g}") if spec.name else f"shifted {dt:g}")


def _template(tau: float):
    rec = psi_and_xi(tau)
    L, rho, xi = rec.lam, rec.rho, rec.xi
    return L, rho, xi, L - rho, max(0.0, tau - rho)


def perturbed_family(tau: float, horizon: float, shortening: Sequence[float] = (),
                     lag_cut: Sequence[float] = (), signed: bool = True) -> DdeSpec:
    """Problem whose solution repeats the varpi_tau semicycle with perturbations.

    Semicycle n starts at a zero z_n.  Its ascent first copies the previous
    maximum (frozen delay), then reads the previous descent with lag
    ``tau - lag_cut[n]``, then grows exponentially; the descent starts
    ``shortening[n]`` earlier than in varpi_tau and copies x_tau scaled by the
    new maximum, so the next zero is at ``z_n + Lambda - shortening[n]``.
    Missing entries are zero.  With ``signed`` the semicycles alternate in
    sign and p carries the matching sign factor.  The lag never exceeds tau.
    """
    tau = check_tau(tau, upper=2.0)
    if tau >= 2.0:
        raise DomainError("the perturbed family needs tau < 2")
    L, rho, xi, top, asc_frozen = _template(tau)
    sol = build_varpi(tau, tilde=signed)
    p_parts: list = []
    d_parts: list = []
    z = 0.0
    n = 0
    while z < horizon:
        d_n = float(shortening[n]) if n < len(shortening) else 0.0
        e_n = float(lag_cut[n]) if n < len(lag_cut) else 0.0
        if not (0.0 <= e_n < tau) or not (top - d_n > 0.0):
            raise ConstructionError(f"perturbation ({d_n}, {e_n}) too large at semicycle {n}")
        s_cur = -1.0 if (signed and n % 2) else 1.0
        s_prev = -s_cur if signed else 1.0
        t_top = z + top - d_n
        asc = [(z, min(z + asc_frozen, t_top), z - rho, 0.0),
               (z + asc_frozen, min(z + xi, t_top), z + asc_frozen - tau + e_n, 1.0),
               (z + xi, t_top, z + xi, 1.0)]
        for lo, hi, start, slope in asc:
            if hi - lo <= 1e-14:
                continue
            # split where the delayed argument crosses the current zero
            cut = lo + (z - start) / slope if slope > 0 and start < z else None
            pts = [lo, cut, hi] if cut is not None and lo < cut < hi else [lo, hi]
            for a, b in zip(pts, pts[1:]):
                arg_mid = start + slope * (0.5 * (a + b) - lo)
                sign = s_cur * (s_cur if arg_mid >= z else s_prev)
                p_parts.append((a, b, sign))
                d_parts.append((a, b, start + slope * (a - lo), slope))
        z_next = t_top + rho
        d_frozen_end = min(z_next, t_top + tau)
        p_parts.append((t_top, z_next, -1.0))
        d_parts.append((t_top, d_frozen_end, t_top, 0.0))
        if z_next - d_frozen_end > 1e-14:
            d_parts.append((d_frozen_end, z_next, d_frozen_end - tau, 1.0))
        z = z_next
        n += 1
    p_fn = PiecewiseFn(_merge_constant([Segment.constant(a, b, v) for a, b, v in p_parts]))
    delay = DelayFn.from_pieces(d_parts)
    return DdeSpec(p_fn, delay, 0.0, sol.fn, normalized=True,
                   name=f"perturbed varpi tau={tau!r}" + (" signed" if signed else ""))


def _merge_constant(segs):
    out = []
    for s in segs:
        if out and out[-1].constant_value() == s.constant_value():
            out[-1] = Segment.constant(out[-1].left, s.right, s.constant_value())
        else:
            out.append(s)
    return out


def summable_perturbations(n: int, seed: int, amp: float = 0.05, tau: Optional[float] = None):
    """Seeded per-semicycle (shortening, lag cut) of size amp * 2^-k * U_k."""
    rng = np.random.default_rng(seed)
    k = np.arange(n)
    scale = amp * 0.5 ** k
    short = scale * rng.uniform(0.0, 1.0, n)
    cut = scale * rng.uniform(0.0, 1.0, n)
    if tau is not None:
        cut = np.minimum(cut, 0.5 * tau)
    return short, cut


# -- the probe -----------------------------------------------------------------

def _windows(t0: float, end: float, period: float):
    k = max(1, int(math.floor((end - t0) / period + 1e-9)))
    starts = t0 + period * np.arange(k)
    return starts


def _residuals(x, ref, M: float, eta: float, starts, period: float, per_unit: int, signed: bool):
    res = np.empty(len(starts))
    for i, s in enumerate(starts):
        t = probe_grid(x, s, s + period, per_unit)
        v = eval_fn(x, t)
        if not signed:
            v = np.abs(v)
        res[i] = float(np.max(np.abs(v - M * eval_fn(ref, t + eta))))
    return res


def _fit(x, ref, t0: float, end: float, horizon: float, period: float, per_unit: int, signed: bool):
    lo = end - FINAL_FRACTION * horizon
    _, M = window_max(x, lo, end)
    t = probe_grid(x, lo, end, per_unit)
    v = eval_fn(x, t)
    if not signed:
        v = np.abs(v)
    if M <= 0.0:
        return 0.0, 0.0
    eta, _ = fit_shift(v, t, ref, M, period)
    return M, eta


def convergence_probe(spec: DdeSpec, horizon: Optional[float] = None, tau: Optional[float] = None,
                      per_unit: int = 100, x: Optional[Trajectory] = None) -> ConvergenceReport:
    """Fit ``|x(t)| = M varpi_tau(t + eta) + small`` and grade the residual trend.

    ``tau`` defaults to the spec's tau_m; the horizon defaults to 200 Lambda(tau).
    """
    tau = spec.tau_m if tau is None else float(tau)
    if not (INV_E + 0.01 < tau < 2.0):
        raise DomainError(f"tau={tau} outside (1/e + 0.01, 2)")
    if spec.tau_m > tau + 1e-12:
        raise DomainError(f"tau_m={spec.tau_m} exceeds tau={tau}")
    ref = build_varpi(tau)
    L = ref.period
    if horizon is None:
        horizon = DEFAULT_PERIODS * L
    end = spec.t0 + horizon
    if x is None:
        x = integrate(spec, end)
    zeros = find_roots(x, spec.t0, end).points
    if len(zeros) < 3:
        raise NotOscillatoryError(f"only {len(zeros)} zeros over the horizon")
    M, eta = _fit(x, ref.fn, spec.t0, end, horizon, L, per_unit, signed=False)
    starts = _windows(spec.t0, end, L)
    res = _residuals(x, ref.fn, M, eta, starts, L, per_unit, signed=False)
    enough = horizon >= MIN_PERIODS * L - 1e-9
    verdict = verdict_from(res, M, enough)
    local = local_bound_fit(x, zeros, tau, ref)
    note = "" if enough else f"horizon below {MIN_PERIODS} periods"
    return ConvergenceReport(M, eta, res, starts, verdict, tau, L, horizon, REL_TOLERANCE * M,
                             False, local, note)


def local_bound_fit(x, zeros, tau: float, ref=None) -> dict:
    """Per semicycle: max deficit delta against the look-back max and the
    distance to the varpi_tau profile started at the semicycle's zero.

    Reports the constant C = max dist / delta^(2^(-1-floor(rho/tau))) over
    semicycles with delta > 0; None when every delta vanishes.
    """
    ref = ref or build_varpi(tau)
    rec = psi_and_xi(tau)
    rho, L = rec.rho, rec.lam
    expo = 2.0 ** (-1 - math.floor(rho / tau + 1e-12))
    lo_span = x.span[0]
    zeros = np.asarray(zeros)
    deltas, dists = [], []
    for z0, z1 in zip(zeros, zeros[1:]):
        if z0 - tau - rho < lo_span or z1 - z0 < 1e-9:
            continue
        _, prev = window_max(x, z0 - tau - rho, z0, per_unit=200)
        _, peak = window_max(x, z0, z1, per_unit=200)
        if prev <= 0.0:
            continue
        delta = max(0.0, 1.0 - peak / prev)
        hi = min(z0 + L, x.span[1])
        t = np.linspace(max(z0 - rho, lo_span), hi, 800)
        dist = float(np.max(np.abs(np.abs(eval_fn(x, t)) / prev - eval_fn(ref.fn, t - z0))))
        deltas.append(delta)
        dists.append(dist)
    deltas, dists = np.array(deltas), np.array(dists)
    pos = deltas > 1e-12
    C = float(np.max(dists[pos] / deltas[pos] ** expo)) if np.any(pos) else None
    return {"exponent": expo, "C": C, "semicycles": int(len(deltas)),
            "max_delta": float(deltas.max()) if deltas.size else 0.0,
            "max_distance": float(dists.max()) if dists.size else 0.0}


# -- positive feedback: exploratory comparison with varpi^+ --------------------------

def plus_spec(history: PiecewiseFn, t0: float = 0.0) -> DdeSpec:
    """p = 1 with the varpi^+ delay; the history is supplied by the caller."""
    base = build_plus().spec
    return DdeSpec(base.p, base.tau, t0, history, normalized=True, name="plus delay")


def plus_history(scale: float = 1.0, bump: float = 0.0, width: float = 0.5,
                 at: Optional[float] = None, lo: float = -4.0) -> PiecewiseFn:
    """``scale * varpi^+`` on ``[lo, 0]`` plus a parabolic bump of height ``bump``.

    The bump sits on ``[at, at + width]``; the default ``at = -P`` puts it where
    the first period of the plus delay reads its history.
    """
    base = build_plus().fn.unrolled(lo, 0.0).scaled(scale)
    if bump == 0.0:
        return base
    a = -build_plus().period if at is None else float(at)
    b = a + width
    if not (width > 0.0 and lo <= a and b <= 0.0):
        raise DomainError("bump must fit inside the history window")
    c = 4.0 * bump / width ** 2
    glob = np.array([-c * a * b, c * (a + b), -c])  # c (t - a)(b - t)
    segs = []
    for sg in base.segments:
        cuts = [sg.left] + [q for q in (a, b) if sg.left < q < sg.right] + [sg.right]
        for u, v in zip(cuts, cuts[1:]):
            piece = sg if (u, v) == (sg.left, sg.right) else sg.restricted(u, v)
            if a <= u and v <= b:
                piece = Segment(u, v, list(piece.terms) + [(0.0, _compose_affine(glob, u, 1.0))])
            segs.append(piece)
    return PiecewiseFn(segs)


def conjecture_probe(history: PiecewiseFn, horizon: Optional[float] = None,
                     per_unit: int = 100) -> ConvergenceReport:
    """Compare the signed solution with shifted multiples of varpi^+.

    The default horizon is ``CONJECTURE_PERIODS`` periods, short of the
    threshold for a non-inconclusive verdict.

    The verdict is prefixed ``exploratory:``; nothing here is a theorem check.
    """
    plus = build_plus()
    spec = plus_spec(history)
    P = plus.period
    full = plus.full_period
    if horizon is None:
        horizon = CONJECTURE_PERIODS * P
    end = spec.t0 + horizon
    x = integrate(spec, end)
    zeros = find_roots(x, spec.t0, end).points
    if len(zeros) < 3:
        raise NotOscillatoryError(f"only {len(zeros)} zeros over the horizon")
    lo = end - FINAL_FRACTION * horizon
    _, M = window_max(x, lo, end)
    t = probe_grid(x, lo, end, per_unit)
    eta, _ = fit_shift(eval_fn(x, t), t, plus.fn, M, full)
    starts = _windows(spec.t0, end, P)
    res = _residuals(x, plus.fn, M, eta, starts, P, per_unit, signed=True)
    enough = horizon >= MIN_PERIODS * P - 1e-9
    verdict = "exploratory: " + verdict_from(res, M, enough)
    note = "open conjecture; the verdict is not asserted"
    late = find_roots(x, lo, end)
    if len(late.points) + len(late.zero_intervals) < 2:
        note += "; the solution has stopped oscillating in the final window"
    return ConvergenceReport(M, eta, res, starts, verdict, None, P, horizon, REL_TOLERANCE * M,
                             True, {}, note)
