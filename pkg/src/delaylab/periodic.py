"""Special (anti)periodic solutions and their defining problem instances.

``minus``        p = -1, antiperiod 5/2
``plus``         p = +1, antiperiod 13/8 + ln 2
``varpi``        mixed feedback, nonnegative, period Lambda(tau)
``varpi_tilde``  p = +1, antiperiod Lambda(tau), equal to varpi on one period
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

import numpy as np

from .dde import DdeSpec, DelayFn, integrate, residual
from .errors import NumericError
from .myshkis import myshkis_solution
from .numerics import check_tau
from .piecewise import (DomainError, Periodicity, PiecewiseFn, Segment, Trajectory,
                        _golden_min, eval_fn)
from .threshold import lambda_closed_form, psi_and_xi

KINDS = ("minus", "plus", "varpi", "varpi_tilde")
LN2 = math.log(2.0)
PLUS_PERIOD = 13.0 / 8.0 + LN2


class PeriodMismatchError(ValueError):
    """Periods are not commensurate."""


@dataclass(frozen=True)
class PeriodicSolution:
    kind: str
    tau: Optional[float]
    solution: Trajectory
    spec: DdeSpec
    period: float
    sign: int

    @property
    def fn(self) -> PiecewiseFn:
        return self.solution.exact

    @property
    def full_period(self) -> float:
        return self.period * (2 if self.sign == -1 else 1)

    def __call__(self, t):
        return self.solution(t)

    @property
    def label(self) -> str:
        return self.kind if self.tau is None else f"{self.kind}:{self.tau:g}"


def _pieces(parts, tol=1e-14):
    """Drop zero-length pieces."""
    return [p for p in parts if p[1] - p[0] > tol]


def _assemble(kind, tau, period, sign, sol_segs, p_parts, tau_parts) -> PeriodicSolution:
    fn = PiecewiseFn(sol_segs, Periodicity(period, sign))
    p = PiecewiseFn([Segment.constant(a, b, v) for a, b, v in _pieces(p_parts)], Periodicity(period, 1))
    d = DelayFn.from_pieces(_pieces(tau_parts), shift_period=period)
    spec = DdeSpec(p, d, 0.0, fn, normalized=True, name=kind if tau is None else f"{kind}:{tau!r}")
    return PeriodicSolution(kind, tau, Trajectory(exact=fn, meta=spec.name), spec, period, sign)


def build_minus() -> PeriodicSolution:
    segs = [Segment.affine(0.0, 1.5, 1.0, -1.0),
            Segment.polynomial(1.5, 2.5, [-0.5, -1.0, 0.5])]
    return _assemble("minus", None, 2.5, -1, segs,
                     [(0.0, 2.5, -1.0)],
                     [(0.0, 1.5, 0.0, 0.0), (1.5, 2.5, 0.0, 1.0)])


def build_plus() -> PeriodicSolution:
    P = PLUS_PERIOD
    segs = [Segment.affine(0.0, 1.125, 1.0, -1.0),
            Segment.polynomial(1.125, 1.625, [-0.125, -1.0, 0.5]),
            Segment.exponential(1.625, P, -0.5)]
    return _assemble("plus", None, P, -1, segs,
                     [(0.0, P, 1.0)],
                     [(0.0, 1.125, -P, 0.0), (1.125, 1.625, -P, 1.0), (1.625, P, 1.625, 1.0)])


def _varpi_parts(tau: float, closed: bool):
    """Solution segments on [0, Lambda] plus (Lambda, rho, xi)."""
    if closed:
        r = math.sqrt(2.0 * tau)
        L = lambda_closed_form(tau)
        xi = tau + 1.0 - r
        rho = 1.0
        a = tau - 1.0
        raw = [(0.0, a, lambda lo, hi: Segment.affine(lo, hi, 0.0, 1.0)),
               (a, xi, lambda lo, hi: Segment.polynomial(lo, hi, [a, 1.0, -0.5])),
               (xi, L - 1.0, lambda lo, hi: Segment.exponential(lo, hi, r - 1.0)),
               (L - 1.0, L, lambda lo, hi: Segment.affine(lo, hi, L, -1.0))]
        segs = [mk(lo, hi) for lo, hi, mk in raw if hi - lo > 1e-14]
        return segs, L, rho, xi
    rec = psi_and_xi(tau)
    L, rho, xi = rec.lam, rec.rho, rec.xi
    psi = rec.psi.exact
    segs = [s for s in psi.segments if s.right <= xi + 1e-15]
    top = L - rho
    if top - xi > 1e-14:
        segs.append(Segment.exponential(xi, top, rec.psi_at_xi))
    x = myshkis_solution(tau).fn
    for s in x.segments_between(0.0, rho):
        lo, hi = max(s.left, 0.0), min(s.right, rho)
        if hi - lo <= 1e-14:
            continue
        piece = s if (lo == s.left and hi == s.right) else s.restricted(lo, hi)
        segs.append(piece.moved(top))
    last = segs[-1]
    segs[-1] = Segment(last.left, L, last.terms)  # pin the period end
    return segs, L, rho, xi


def build_varpi(tau: float, closed: Optional[bool] = None, tilde: bool = False) -> PeriodicSolution:
    tau = check_tau(tau, upper=2.0)
    if closed is None:
        closed = tau >= 1.0
    if closed and tau < 1.0:
        raise DomainError("closed-form segments exist for tau in [1, 2] only")
    segs, L, rho, xi = _varpi_parts(tau, closed)
    top = L - rho
    asc_frozen = max(0.0, tau - rho)
    desc_frozen = min(L, top + tau)
    if not tilde:
        p_parts = [(0.0, top, 1.0), (top, L, -1.0)]
        d_parts = [(0.0, asc_frozen, -rho, 0.0), (asc_frozen, xi, asc_frozen - tau, 1.0),
                   (xi, top, xi, 1.0), (top, desc_frozen, top, 0.0),
                   (desc_frozen, L, desc_frozen - tau, 1.0)]
        return _assemble("varpi", tau, L, 1, segs, p_parts, d_parts)
    p_parts = [(0.0, L, 1.0)]
    lag = tau + L
    d_parts = [(0.0, asc_frozen, -L - rho, 0.0), (asc_frozen, xi, asc_frozen - lag, 1.0),
               (xi, top, xi, 1.0), (top, desc_frozen, -rho, 0.0),
               (desc_frozen, L, desc_frozen - lag, 1.0)]
    return _assemble("varpi_tilde", tau, L, -1, segs, p_parts, d_parts)


def build(kind: str, tau: Optional[float] = None, closed: Optional[bool] = None) -> PeriodicSolution:
    if kind == "minus":
        return build_minus()
    if kind == "plus":
        return build_plus()
    if kind in ("varpi", "varpi_tilde"):
        if tau is None:
            raise DomainError(f"{kind} needs tau")
        return build_varpi(tau, closed, tilde=(kind == "varpi_tilde"))
    raise DomainError(f"unknown kind {kind!r}; expected one of {KINDS}")


def parse_preset(name: str) -> PeriodicSolution:
    """``minus``, ``plus``, ``varpi:<tau>`` or ``varpi_tilde:<tau>``."""
    kind, _, arg = name.partition(":")
    try:
        return build(kind, float(arg) if arg else None)
    except ValueError as exc:
        raise DomainError(f"bad preset {name!r}: {exc}") from None


# -- verification -------------------------------------------------------------

@dataclass
class VerifyReport:
    label: str
    residual: float          # of the closed-form solution against its spec
    periodicity_defect: float  # of the re-integrated trajectory
    integration_error: float   # re-integrated vs constructed
    nonnegative: Optional[bool]
    min_abs_slope: float
    tau_m: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def verify(sol: PeriodicSolution, periods: float = 3.0, samples: int = 6001) -> VerifyReport:
    P = sol.period
    span = periods * P
    probe = np.linspace(0.0, span, samples)
    res = residual(sol.solution, sol.spec, probe)
    traj = integrate(sol.spec, span + P)
    t = np.linspace(0.0, span, samples)
    defect = float(np.max(np.abs(traj(t + P) - sol.sign * traj(t))))
    err = float(np.max(np.abs(traj(t) - sol(t))))
    nonneg = None
    if sol.kind == "varpi":
        nonneg = bool(np.min(sol(np.linspace(0.0, P, samples))) >= -1e-15)
    d = sol.fn.derivative()
    tt = np.linspace(0.0, P, samples)
    bp = sol.fn.breakpoints
    tt = tt[np.min(np.abs(tt[:, None] - bp[None, :]), axis=1) > 1e-9]
    slope = float(np.min(np.abs(d(tt))))
    return VerifyReport(sol.label, res, defect, err, nonneg, slope, sol.spec.tau_m)


# -- shift equivalence ---------------------------------------------------------------

def _full_period(f) -> tuple[float, object]:
    if isinstance(f, PeriodicSolution):
        return f.full_period, f.fn
    if isinstance(f, Trajectory):
        f = f.exact
    if isinstance(f, PiecewiseFn) and f.periodicity is not None:
        per = f.periodicity
        return per.period * (2 if per.sign == -1 else 1), f
    raise PeriodMismatchError("shift equivalence needs periodic inputs")


def _common_period(pa: float, pb: float, tol: float = 1e-9) -> float:
    frac = Fraction(pa / pb).limit_denominator(64)
    if abs(frac.numerator * pb - frac.denominator * pa) > tol * max(pa, pb) * frac.denominator:
        raise PeriodMismatchError(f"periods {pa} and {pb} are not commensurate")
    return frac.denominator * pa


def shift_equivalence(a, b, samples: int = 4000, scan: int = 1000) -> tuple[float, float]:
    """Shift s in [0, P_a) minimizing sup_t |a(t + s) - b(t)| and the achieved distance.

    P_a is the full period of ``a`` (twice the antiperiod).
    """
    pa, fa = _full_period(a)
    pb, fb = _full_period(b)
    common = _common_period(pa, pb)
    t = np.linspace(0.0, common, samples, endpoint=False)
    bt = eval_fn(fb, t)

    def dist(s):
        return float(np.max(np.abs(eval_fn(fa, t + s) - bt)))

    shifts = np.arange(scan) * (pa / scan)
    coarse = np.array([dist(s) for s in shifts])
    i = int(np.argmin(coarse))
    step = pa / scan
    s_best, d_best = _golden_min(dist, shifts[i] - step, shifts[i] + step, iters=120)
    if coarse[i] < d_best:
        s_best, d_best = shifts[i], coarse[i]
    return float(s_best % pa), float(d_best)


def catalog(taus=(0.5, 0.8, 1.0, 1.5, 2.0), tilde_taus=(1.0, 1.125, 1.5)) -> list:
    sols = [build_minus(), build_plus()]
    sols += [build_varpi(t) for t in taus]
    sols += [build_varpi(t, tilde=True) for t in tilde_taus]
    return sols
