"""Growth envelope psi_tau, switch point xi_tau and critical semicycle length Lambda(tau).

psi_tau starts at 0, grows with derivative ``x_tau(rho + t - tau)`` until the
switch point ``xi`` where that derivative drops below psi itself, and then
grows exponentially.  Lambda(tau) = rho + psi^{-1}(1).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NumericError
from .myshkis import myshkis_solution
from .numerics import (DEFAULT_EPS, INV_E, LAMBDA_LIMIT, RHO_LIMIT, XI_LIMIT,
                       check_tau, richardson)
from .piecewise import DomainError, PiecewiseFn, Segment, Trajectory, bisect_root


@dataclass(frozen=True)
class ThresholdRecord:
    tau: float
    psi: Trajectory
    xi: float
    lam: float
    rho: float

    @property
    def psi_at_xi(self) -> float:
        return float(self.psi(self.xi))

    def to_dict(self) -> dict:
        return {"tau": self.tau, "rho": self.rho, "xi": self.xi, "lambda": self.lam,
                "psi": self.psi.exact.to_dict()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass(frozen=True)
class SpectralRecord:
    tau: float
    mu: float
    nu: float
    gamma: float

    def residuals(self) -> tuple[float, float]:
        return _spectral_residual(self.tau, self.mu, self.nu)

    def to_dict(self) -> dict:
        return {"tau": self.tau, "mu": self.mu, "nu": self.nu, "gamma": self.gamma}


def descent_profile(tau: float) -> PiecewiseFn:
    """q(t) = x_tau(rho + t - tau) on [0, tau] as exact pieces."""
    rec = myshkis_solution(tau)
    r = rec.rho
    pieces = []
    for seg in rec.fn.segments_between(r - tau, r):
        lo, hi = max(seg.left, r - tau), min(seg.right, r)
        if hi - lo <= 1e-14 * max(1.0, r):
            continue
        pieces.append(seg.composed(lo - r + tau, hi - r + tau, lo, 1.0))
    # pin the end points exactly to [0, tau]
    first, last = pieces[0], pieces[-1]
    if first.left != 0.0:
        pieces[0] = Segment(0.0, first.right, first.terms) if abs(first.left) < 1e-12 else first
    if last.right != tau:
        pieces[-1] = Segment(last.left, tau, last.terms)
    return PiecewiseFn(pieces)


def _xi_from_profile(q: PiecewiseFn) -> tuple[float, list]:
    """Root of Theta(t) = int_0^t q - q(t) plus the primitive pieces of q."""
    prims = []
    acc = 0.0
    for seg in q.segments:
        prim = seg.antiderivative(acc)
        prims.append(prim)
        acc = prim.value_at_right()
    for seg, prim in zip(q.segments, prims):
        theta_r = prim.value_at_right() - seg.value_at_right()
        if theta_r >= 0.0:
            fn = lambda t, s=seg, p=prim: float(p(t) - s(t))
            return bisect_root(fn, seg.left, seg.right), prims
    raise NumericError("Theta has no sign change on [0, tau]")


@lru_cache(maxsize=256)
def psi_and_xi(tau: float) -> ThresholdRecord:
    """psi_tau (exact pieces), xi_tau and Lambda(tau)."""
    tau = check_tau(tau, upper=2.0)
    rec = myshkis_solution(tau)
    q = descent_profile(tau)
    xi, prims = _xi_from_profile(q)
    segs = []
    for prim in prims:
        if prim.left >= xi:
            break
        segs.append(prim if prim.right <= xi else Segment(prim.left, xi, prim.terms))
    psi_xi = segs[-1].value_at_right()
    if psi_xi <= 0.0:
        raise NumericError(f"psi(xi) = {psi_xi} is not positive")
    # Lambda - rho solves psi = 1: in the exponential part when psi(xi) <= 1
    if psi_xi <= 1.0:
        lam_minus_rho = xi - math.log(psi_xi)
    else:
        lam_minus_rho = None
        for s in segs:
            if s.value_at_right() >= 1.0:
                lam_minus_rho = bisect_root(lambda t, s=s: float(s(t)) - 1.0, s.left, s.right)
                break
    end = max(tau, lam_minus_rho) + 1.0
    segs.append(Segment(xi, end, [(1.0, [psi_xi])]))
    psi = PiecewiseFn(segs)
    # authoritative inverse by bisection on the monotone psi
    t_one = bisect_root(lambda t: float(psi(t)) - 1.0, 0.0, end)
    if abs(t_one - lam_minus_rho) > 1e-9 * max(1.0, lam_minus_rho):
        raise NumericError(f"psi inverse mismatch: {t_one} vs {lam_minus_rho}")
    traj = Trajectory(exact=psi, meta=f"psi tau={tau!r}")
    return ThresholdRecord(tau, traj, float(xi), float(rec.rho + t_one), float(rec.rho))


def lambda_(tau: float) -> float:
    """Critical semicycle length Lambda(tau) for tau in (1/e, 2]."""
    return psi_and_xi(float(tau)).lam


def lambda_closed_form(s: float) -> float:
    s = float(s)
    if not s >= 1.0:
        raise DomainError(f"closed form holds for s >= 1 only, got {s}")
    if s >= 2.0:
        return 2.0
    r = math.sqrt(2.0 * s)
    return 2.0 + s - r - math.log(r - 1.0)


def xi_closed_form(s: float) -> float:
    """Switch point on [1, 2]."""
    if not 1.0 <= s <= 2.0:
        raise DomainError("switch-point closed form holds on [1, 2]")
    return s + 1.0 - math.sqrt(2.0 * s)


# -- spectral quantities ---------------------------------------------------------

# principal root of z e^z = -1 (z = mu + i nu), used to seed continuation
_SEED_TAU = 1.0
_SEED = (-0.31813150520476413, 1.3372357014306895)


def _spectral_residual(tau, mu, nu):
    a = tau * math.exp(-mu)
    return mu + a * math.cos(nu), nu - a * math.sin(nu)


def _newton(tau, mu, nu, tol=1e-14, maxit=60):
    F = np.array(_spectral_residual(tau, mu, nu))
    for _ in range(maxit):
        if np.max(np.abs(F)) <= tol:
            return mu, nu, True
        a = tau * math.exp(-mu)
        c, s = math.cos(nu), math.sin(nu)
        J = np.array([[1.0 - a * c, -a * s], [a * s, 1.0 - a * c]])
        try:
            d = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            return mu, nu, False
        lam = 1.0
        norm0 = np.max(np.abs(F))
        while lam > 1e-6:
            m2, n2 = mu + lam * d[0], nu + lam * d[1]
            if 0.0 < n2 < math.pi:
                F2 = np.array(_spectral_residual(tau, m2, n2))
                if np.max(np.abs(F2)) < norm0 or np.max(np.abs(F2)) <= tol:
                    break
            lam *= 0.5
        else:
            return mu, nu, False
        mu, nu, F = m2, n2, F2
    return mu, nu, bool(np.max(np.abs(F)) <= 1e-12)


def _path(tau: float) -> list:
    """Continuation parameters from the seed to ``tau``."""
    if tau < _SEED_TAU:
        e0, e1 = _SEED_TAU - INV_E, tau - INV_E
        n = max(2, int(math.ceil(math.log(e0 / e1) / math.log(1.3))))
        return list(INV_E + np.geomspace(e0, e1, n + 1)[1:])
    n = max(2, int(math.ceil(math.log(tau / _SEED_TAU) / math.log(1.3))))
    return list(np.geomspace(_SEED_TAU, tau, n + 1)[1:])


@lru_cache(maxsize=512)
def spectral(tau: float) -> SpectralRecord:
    """Principal root (nu in (0, pi)) of the characteristic system by continued Newton."""
    tau = check_tau(tau)
    mu, nu = _SEED
    for t in _path(tau):
        ok = False
        for _ in range(4):
            m2, n2, ok = _newton(t, mu, nu)
            if ok:
                break
        if not ok:
            raise NumericError(f"spectral continuation failed at tau={t} "
                               f"(last mu={m2}, nu={n2}, residual={_spectral_residual(t, m2, n2)})")
        mu, nu = m2, n2
    if not (0.0 < nu < math.pi and mu > -1.0):
        raise NumericError(f"continuation left the principal branch: mu={mu}, nu={nu}")
    gamma = math.atan((1.0 + mu) / nu)
    return SpectralRecord(tau, float(mu), float(nu), float(gamma))


# -- asymptotics near the threshold ------------------------------------------------

@dataclass
class LambdaAsymptotics:
    taus: np.ndarray
    lambda_scaled: np.ndarray
    rho_scaled: np.ndarray
    mu_ratio: np.ndarray  # (1 + mu) / nu^2
    gamma_ratio: np.ndarray  # gamma / nu
    xi: np.ndarray
    root_combination: np.ndarray  # (rho + tau)/tau - (pi/nu - 1/3)
    limits: dict
    targets: dict

    def rel_errors(self) -> dict:
        return {k: abs(self.limits[k] - v) / abs(v) for k, v in self.targets.items() if v != 0}

    def rows(self):
        for i in range(len(self.taus)):
            yield (self.taus[i], self.lambda_scaled[i], self.rho_scaled[i], self.mu_ratio[i],
                   self.gamma_ratio[i], self.xi[i], self.root_combination[i])

    def to_dict(self) -> dict:
        return {"tau": self.taus.tolist(), "lambda_scaled": self.lambda_scaled.tolist(),
                "rho_scaled": self.rho_scaled.tolist(), "mu_ratio": self.mu_ratio.tolist(),
                "gamma_ratio": self.gamma_ratio.tolist(), "xi": self.xi.tolist(),
                "root_combination": self.root_combination.tolist(),
                "extrapolated": self.limits, "targets": self.targets}


def lambda_asymptotics(eps=DEFAULT_EPS) -> LambdaAsymptotics:
    """Scaled quantities on tau = 1/e + eps, extrapolated to eps -> 0 in powers of sqrt(eps)."""
    eps = np.asarray(eps, dtype=float)
    if np.any(eps <= 0) or np.any(eps > 0.05 + 1e-15):
        raise ValueError("grid must lie in (1/e, 1/e + 0.05]")
    taus = INV_E + eps
    h = np.sqrt(eps)
    recs = [psi_and_xi(float(t)) for t in taus]
    specs = [spectral(float(t)) for t in taus]
    lam_s = np.array([r.lam for r in recs]) * h
    rho_s = np.array([r.rho for r in recs]) * h
    mu_r = np.array([(1 + s.mu) / s.nu ** 2 for s in specs])
    gam_r = np.array([s.gamma / s.nu for s in specs])
    xi = np.array([r.xi for r in recs])
    comb = np.array([(r.rho + r.tau) / r.tau - (math.pi / s.nu - 1.0 / 3.0) for r, s in zip(recs, specs)])
    limits = {
        "lambda_scaled": richardson(h, lam_s),
        "rho_scaled": richardson(h, rho_s),
        "mu_ratio": richardson(h, mu_r),
        "gamma_ratio": richardson(h, gam_r),
        "xi": richardson(h, xi),
        "root_combination": richardson(h, comb),
    }
    targets = {"lambda_scaled": LAMBDA_LIMIT, "rho_scaled": RHO_LIMIT, "mu_ratio": 1.0 / 3.0,
               "gamma_ratio": 1.0 / 3.0, "xi": XI_LIMIT, "root_combination": 0.0}
    return LambdaAsymptotics(taus, lam_s, rho_s, mu_r, gam_r, xi, comb, limits, targets)


def envelope_check(tau: float, samples: int = 401) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Oscillatory approximant of x_tau(rho + t - tau) on [0, tau] and its error bound.

    Returns (t, |x - approximant|, bound).
    """
    rec = myshkis_solution(check_tau(tau))
    sp = spectral(tau)
    t = np.linspace(0.0, tau, samples)
    T = (rec.rho + t) / tau
    amp = 2.0 / math.sqrt(((1 + sp.mu) / sp.nu) ** 2 + 1.0)
    approx = np.exp(sp.mu * T) * amp * np.sin(sp.nu * T + sp.gamma) / sp.nu
    x = rec.x_tau(rec.rho + t - tau)
    c = math.log(4.0) - 1.0
    bound = math.pi ** 2 / (3.0 * c) * np.exp(-T * c) * np.exp(sp.mu * T)
    return t, np.abs(x - approx), bound


# -- tables ------------------------------------------------------------------------

TABLE_COLUMNS = ["tau", "rho", "xi", "lambda", "lambda_closed", "mu", "nu", "gamma"]


def table_rows(taus) -> list:
    rows = []
    for t in taus:
        r = psi_and_xi(float(t))
        sp = spectral(float(t))
        closed = lambda_closed_form(t) if t >= 1.0 else float("nan")
        rows.append([float(t), r.rho, r.xi, r.lam, closed, sp.mu, sp.nu, sp.gamma])
    return rows


def table_csv(taus) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_COLUMNS)
    for row in table_rows(taus):
        w.writerow([repr(v) for v in row])
    return buf.getvalue()
