"""The comparison solution x_tau of x'(t) = -x(t - tau) with unit history.

On the k-th delay interval ``[k tau, (k+1) tau]`` the solution is a polynomial
of degree k+1 in the local variable ``u = t - k tau``; the coefficients follow
from the previous interval by one exact integration.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import chebyshev as cheb
from numpy.polynomial import polynomial as npoly

from .numerics import INV_E, RHO_LIMIT, DEFAULT_EPS, check_tau, richardson
from .piecewise import PiecewiseFn, Segment, Trajectory, bisect_root

PHI_DEGREE_CAP = 30


@dataclass(frozen=True)
class MyshkisRecord:
    tau: float
    x_tau: Trajectory  # exact on [-tau, K tau] with K tau >= rho + tau
    rho: float

    def __call__(self, t):
        return self.x_tau(t)

    @property
    def fn(self) -> PiecewiseFn:
        return self.x_tau.exact

    def to_dict(self) -> dict:
        return {"tau": self.tau, "rho": self.rho, "x_tau": self.x_tau.exact.to_dict()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _coefficients(tau: float, n_intervals: int) -> list:
    """Local coefficient arrays c_k for k = 0..n_intervals-1."""
    coeffs = [np.array([1.0, -1.0])]
    for _ in range(1, n_intervals):
        prev = coeffs[-1]
        nxt = np.empty(len(prev) + 1)
        nxt[0] = npoly.polyval(tau, prev)
        nxt[1:] = -prev / np.arange(1, len(prev) + 1)
        coeffs.append(nxt)
    return coeffs


@lru_cache(maxsize=256)
def myshkis_solution(tau: float) -> MyshkisRecord:
    """x_tau on ``[-tau, rho + tau]`` (rounded up to whole delay intervals) and its first root."""
    tau = check_tau(tau)
    coeffs = [np.array([1.0, -1.0])]
    rho = None
    k = 0
    while rho is None:
        c = coeffs[k]
        end_val = npoly.polyval(tau, c)
        if end_val <= 0.0:
            if k == 0:
                rho = 1.0  # 1 - u vanishes at u = 1
            elif end_val == 0.0:
                rho = (k + 1) * tau
            else:
                u = bisect_root(lambda v: float(npoly.polyval(v, c)), 0.0, tau)
                rho = k * tau + u
        nxt = np.empty(len(c) + 1)
        nxt[0] = end_val
        nxt[1:] = -c / np.arange(1, len(c) + 1)
        coeffs.append(nxt)
        k += 1
        if k > 100_000:
            raise RuntimeError("first root not found")
    # cover [0, rho + tau]
    n_total = int(math.ceil((rho + tau) / tau - 1e-12))
    n_total = max(n_total, k)
    while len(coeffs) < n_total:
        c = coeffs[-1]
        nxt = np.empty(len(c) + 1)
        nxt[0] = npoly.polyval(tau, c)
        nxt[1:] = -c / np.arange(1, len(c) + 1)
        coeffs.append(nxt)
    segs = [Segment.constant(-tau, 0.0, 1.0)]
    segs += [Segment(j * tau, (j + 1) * tau, [(0.0, coeffs[j])]) for j in range(n_total)]
    fn = PiecewiseFn(segs)
    traj = Trajectory(exact=fn, meta=f"myshkis tau={tau!r}")
    return MyshkisRecord(tau, traj, float(rho))


def rho(tau: float) -> float:
    return myshkis_solution(float(tau)).rho


# -- monotone iteration ---------------------------------------------------------

def _refit(seg: Segment, degree: int) -> Segment:
    """Chebyshev interpolant of a polynomial segment, returned in the local power basis."""
    L = seg.right - seg.left
    ch = cheb.Chebyshev.interpolate(lambda u: seg.local(u), degree, domain=[0.0, L])
    return Segment(seg.left, seg.right, [(0.0, ch.convert(kind=np.polynomial.Polynomial, domain=[0.0, L], window=[0.0, L]).coef)])


def _phi_next(phi: PiecewiseFn, tau: float, r: float, cap: int) -> PiecewiseFn:
    """min{ int_t^r phi(s - tau) ds, 1 } on [0, r], extended by 1 on [-tau, 0]."""
    # G(t) = int_t^r phi(s - tau) ds, built right to left
    pieces = []
    for seg in phi.segments_between(-tau, r - tau):
        lo, hi = max(seg.left, -tau), min(seg.right, r - tau)
        if hi - lo <= 1e-14:
            continue
        pieces.append(seg.composed(lo + tau, hi + tau, lo, 1.0))
    G_segs = [None] * len(pieces)
    acc = 0.0
    for i in range(len(pieces) - 1, -1, -1):
        prim = pieces[i].antiderivative(0.0)
        total = prim.value_at_right()
        # G(t) = acc + total - prim(t)
        terms = [(rt, -c) for rt, c in prim.terms] + [(0.0, [acc + total])]
        G_segs[i] = Segment(pieces[i].left, pieces[i].right, terms)
        acc += total
    G_segs = [s for s in G_segs if s.right > 0.0]
    G_segs = [s.restricted(max(s.left, 0.0), s.right) if s.left < 0.0 else s for s in G_segs]
    # clamp at 1: G is decreasing, so it crosses 1 at most once
    t_star = 0.0
    body = G_segs
    if G_segs[0].value_at_left() > 1.0:
        i = next(j for j, g in enumerate(G_segs) if g.value_at_right() <= 1.0)
        g = G_segs[i]
        t_star = bisect_root(lambda t: float(g(t)) - 1.0, g.left, g.right)
        body = G_segs[i + 1:]
        if g.right - t_star > 1e-14:
            body = [g.restricted(t_star, g.right)] + body
        else:
            t_star = g.right
    out = [Segment.constant(-tau, 0.0, 1.0)]
    if t_star > 1e-14:
        out.append(Segment.constant(0.0, t_star, 1.0))
    elif body[0].left != 0.0:
        body[0] = body[0].restricted(0.0, body[0].right)
    for s in body:
        out.append(_refit(s, cap) if s.degree > cap else s)
    return PiecewiseFn(out)


def phi_iteration(tau: float, n: int, cap: int = PHI_DEGREE_CAP) -> list:
    """phi_0 .. phi_n of the monotone scheme, each exact on ``[-tau, rho]``."""
    tau = check_tau(tau)
    if n < 1:
        raise ValueError("n must be at least 1")
    r = rho(tau)
    phi = PiecewiseFn([Segment.constant(-tau, 0.0, 1.0), Segment.constant(0.0, r, 1.0)])
    out = [Trajectory(exact=phi, meta="phi_0")]
    for k in range(1, n + 1):
        phi = _phi_next(phi, tau, r, cap)
        out.append(Trajectory(exact=phi, meta=f"phi_{k}"))
    return out


def phi_errors(tau: float, n: int, samples: int = 4001) -> np.ndarray:
    """sup over [0, rho] of phi_k - x_tau for k = 0..n (dense sampling plus breakpoints)."""
    rec = myshkis_solution(check_tau(tau))
    phis = phi_iteration(tau, n)
    t = np.linspace(0.0, rec.rho, samples)
    xs = rec.x_tau(t)
    errs = []
    for phi in phis:
        bp = phi.exact.breakpoints
        tt = np.concatenate([t, bp[(bp >= 0) & (bp <= rec.rho)]])
        errs.append(float(np.max(np.abs(phi(tt) - rec.x_tau(tt)))))
    return np.array(errs)


# -- asymptotics ---------------------------------------------------------------

@dataclass
class AsymptoticReport:
    taus: np.ndarray
    values: np.ndarray  # quantity * sqrt(tau - 1/e)
    limit: float
    target: float

    @property
    def rel_error(self) -> float:
        return abs(self.limit - self.target) / abs(self.target)

    def to_dict(self) -> dict:
        return {"tau": self.taus.tolist(), "scaled": self.values.tolist(),
                "extrapolated": self.limit, "target": self.target}


def rho_asymptotics(eps=DEFAULT_EPS) -> AsymptoticReport:
    """rho(tau) * sqrt(tau - 1/e) on the ladder tau = 1/e + eps, extrapolated in sqrt(eps)."""
    eps = np.asarray(eps, dtype=float)
    if np.any(eps <= 0) or np.any(eps > 0.05 + 1e-15):
        raise ValueError("grid must lie in (1/e, 1/e + 0.05]")
    taus = INV_E + eps
    vals = np.array([rho(t) * math.sqrt(e) for t, e in zip(taus, eps)])
    return AsymptoticReport(taus, vals, richardson(np.sqrt(eps), vals), RHO_LIMIT)


def rho_table_csv(taus) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tau", "rho"])
    for t in taus:
        w.writerow([repr(float(t)), repr(rho(t))])
    return buf.getvalue()
