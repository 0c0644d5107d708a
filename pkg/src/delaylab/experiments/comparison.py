"""Backward comparison against the Myshkis function.

A comparison trajectory solves ``y'(t) + c(t) y(t - sigma(t)) = 0`` on
``[0, rho]`` with ``|c| <= 1``, ``0 <= sigma <= tau``, values in ``[0, 1]`` on
``[-tau, rho]`` and ``y(rho) = 0``.  Such a ``y`` stays below ``x_tau`` and the
gap ``a = x_tau - y`` is nonincreasing.  ``random_comparison`` samples such
trajectories; ``decay_bound`` builds one whose gap at ``rho - tau`` equals a
prescribed ``delta`` while the gap at 0 is as large as the order allows.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..dde import DdeSpec, DelayFn, integrate
from ..errors import ConstructionError
from ..myshkis import myshkis_solution
from ..numerics import check_tau
from ..piecewise import DomainError, PiecewiseFn, Segment, Trajectory, bisect_root, eval_fn, find_roots
from .common import growth_envelope
from .envelope import EnvelopeReport, envelope_bounds

MONOTONE_TOL = 1e-12
DELTAS = (1e-2, 1e-3, 1e-4)


def _first_root(x, a: float, b: float) -> Optional[float]:
    rs = find_roots(x, a, b)
    cands = list(rs.points) + [lo for lo, _ in rs.zero_intervals]
    return min(cands) if cands else None


@dataclass
class ComparisonCheck:
    """Outcome of comparing one normalized trajectory with ``x_tau`` on ``[0, rho]``."""

    tau: float
    rho: float
    samples: int
    max_excess: float   # max (y - x_tau); <= 0 when the order holds
    max_rise: float     # max increase of a between consecutive samples
    min_gap: float      # min a

    @property
    def ok(self) -> bool:
        return self.max_excess <= MONOTONE_TOL and self.max_rise <= MONOTONE_TOL


def compare_to_myshkis(y, tau: float, per_unit: int = 400, offset: float = 0.0,
                       scale: float = 1.0) -> ComparisonCheck:
    """Check ``y(t + offset) / scale <= x_tau(t)`` and monotonicity of the gap on ``[0, rho]``."""
    rec = myshkis_solution(tau)
    t = np.linspace(0.0, rec.rho, max(3, int(math.ceil(rec.rho * per_unit)) + 1))
    yv = eval_fn(y, t + offset) / scale
    a = rec.x_tau(t) - yv
    rise = float(np.max(np.diff(a))) if len(a) > 1 else 0.0
    return ComparisonCheck(tau, rec.rho, len(t), float(np.max(-a)), rise, float(np.min(a)))


# -- random admissible trajectories ---------------------------------------------------

@dataclass
class RandomComparison:
    spec: DdeSpec
    x: Trajectory
    root: float          # first root of the raw trajectory (>= rho)
    scale: float         # max of the raw trajectory on [root - rho - tau, root]
    check: ComparisonCheck
    envelope: EnvelopeReport


def _random_history(rng, tau: float) -> PiecewiseFn:
    n = int(rng.integers(1, 5))
    knots = np.linspace(-tau, 0.0, n + 1)
    vals = rng.uniform(0.0, 1.0, n + 1)
    vals[-1] = rng.uniform(0.05, 1.0)
    segs = []
    for (l, r), (u, v) in zip(zip(knots, knots[1:]), zip(vals, vals[1:])):
        slope = (v - u) / (r - l)
        segs.append(Segment.affine(l, r, u - slope * l, slope))
    return PiecewiseFn(segs)


def _random_controls(rng, tau: float, end: float):
    """Piecewise-constant p = -c and delay pieces on [0, end]."""
    cuts = np.sort(rng.uniform(0.0, end, int(rng.integers(1, 7))))
    knots = np.concatenate([[0.0], cuts, [end]])
    p_segs, d_pieces = [], []
    for l, r in zip(knots, knots[1:]):
        if r - l < 1e-6:
            continue
        u = rng.uniform()
        if u < 0.25:
            c = 1.0
        elif u < 0.85:
            c = rng.uniform(0.0, 1.0)
        else:
            c = rng.uniform(-0.3, 0.0)
        p_segs.append(Segment.constant(l, r, -c))
        kind = rng.uniform()
        if kind < 0.25:
            d_pieces.append((l, r, l - tau, 1.0))          # full lag
        elif kind < 0.4:
            d_pieces.append((l, r, l, 1.0))                # no delay
        elif kind < 0.55 and r - l <= tau:
            v = rng.uniform(r - tau, l)                   # frozen argument
            d_pieces.append((l, r, v, 0.0))
        else:
            s = rng.uniform(0.0, tau)
            d_pieces.append((l, r, l - s, 1.0))
    return PiecewiseFn(p_segs), DelayFn.from_pieces(d_pieces)


def _with_history(x: Trajectory, history: PiecewiseFn, lo: float) -> Trajectory:
    """Extend ``x`` backwards with its history down to ``lo``."""
    start = x.span[0]
    if start <= lo + 1e-15:
        return x
    head = [sg.restricted(max(sg.left, lo), min(sg.right, start)) if sg.left < lo else
            Segment(sg.left, min(sg.right, start), sg.terms)
            for sg in history.segments if sg.left < start and sg.right > lo]
    return Trajectory(exact=PiecewiseFn(head + list(x.exact.segments)), meta=x.meta)


def random_comparison(tau: float, rng, end: float = 6.5, search: float = 3.5,
                      per_unit: int = 400, max_tries: int = 1000) -> RandomComparison:
    """One seeded admissible comparison trajectory, with its checks.

    Raw trajectories are drawn until the first root lands in ``[rho, search]``
    (``end`` caps the integration past it);
    translating that root to ``rho`` and dividing by the max over the look-back
    window gives a trajectory meeting every hypothesis of the comparison.
    """
    tau = check_tau(tau)
    rec = myshkis_solution(tau)
    for _ in range(max_tries):
        p, d = _random_controls(rng, tau, end)
        spec = DdeSpec(p, d, 0.0, _random_history(rng, tau), name=f"comparison tau={tau}")
        # cheap rejection first: most draws vanish before rho
        early = _first_root(integrate(spec, rec.rho), 0.0, rec.rho)
        if early is not None and early < rec.rho:
            continue
        r = _first_root(integrate(spec, search), 0.0, search)
        if r is None or r < rec.rho:
            continue
        # the growth envelope is only checked up to lam - rho past the root
        stop = min(end, r + growth_envelope(tau).lam - rec.rho + 0.05)
        x = _with_history(integrate(spec, stop), spec.history, -tau)
        off = r - rec.rho
        grid = np.linspace(off - tau, r, 2000)
        scale = float(np.max(eval_fn(x, grid)))
        if scale <= 0.0:
            continue
        check = compare_to_myshkis(x, tau, per_unit, offset=off, scale=scale)
        env = envelope_bounds(x, tau, (r, stop), zeros=[r], check_max=False, per_unit=per_unit // 2)
        return RandomComparison(spec, x, r, scale, check, env)
    raise ConstructionError(f"no admissible trajectory in {max_tries} draws")


@dataclass
class ComparisonSuite:
    tau: float
    count: int
    failures: int
    worst_excess: float
    worst_rise: float
    envelope: EnvelopeReport

    def to_dict(self) -> dict:
        return {"tau": self.tau, "count": self.count, "failures": self.failures,
                "worst_excess": self.worst_excess, "worst_rise": self.worst_rise,
                "envelope_violations": self.envelope.violations,
                "envelope_zeros": self.envelope.zeros_checked}


def comparison_suite(tau: float, count: int = 200, seed: int = 0) -> ComparisonSuite:
    rng = np.random.default_rng(seed)
    env = EnvelopeReport(tau)
    fails, excess, rise = 0, -math.inf, -math.inf
    for _ in range(count):
        rc = random_comparison(tau, rng)
        fails += not rc.check.ok
        excess = max(excess, rc.check.max_excess)
        rise = max(rise, rc.check.max_rise)
        env.merge(rc.envelope)
    return ComparisonSuite(tau, count, fails, excess, rise, env)


# -- decay bound ------------------------------------------------------------------------

@dataclass
class DecayProbe:
    tau: float
    delta: float
    t: np.ndarray
    a_values: np.ndarray
    exponent: float
    C: float
    eps: float = 0.0          # length of the reversed-feedback start
    a0: float = 0.0           # gap at t = 0
    y: Optional[Trajectory] = None
    extras: dict = field(default_factory=dict)

    @property
    def nonincreasing(self) -> bool:
        return bool(np.all(np.diff(self.a_values) <= MONOTONE_TOL))

    @property
    def nonnegative(self) -> bool:
        return bool(np.all(self.a_values >= -MONOTONE_TOL))

    @property
    def bound(self) -> float:
        return self.C * self.delta ** self.exponent

    def to_dict(self) -> dict:
        return {"tau": self.tau, "delta": self.delta, "exponent": self.exponent, "C": self.C,
                "bound": self.bound, "eps": self.eps, "a0": self.a0,
                "nonincreasing": self.nonincreasing, "nonnegative": self.nonnegative, **self.extras}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def rows(self):
        for ti, ai in zip(self.t, self.a_values):
            yield [float(ti), float(ai)]


DIP_FRACTION = 1e-3  # dip width relative to eps; a wide dip eats the sqrt(delta) gain


def _decay_spec(tau: float, rho: float, eps: float, depth: float) -> DdeSpec:
    """Positive feedback with lag tau on [0, eps], then x_tau's own equation up to rho.

    The history equals 1 except for a linear dip of ``depth`` over the last
    ``DIP_FRACTION * eps`` before 0.
    """
    w = DIP_FRACTION * eps if eps > 0.0 else 1e-6
    hist = PiecewiseFn([Segment.constant(-tau, -w, 1.0),
                        Segment.affine(-w, 0.0, 1.0 - depth, -depth / w)])
    segs = []
    if eps > 0.0:
        segs.append(Segment.constant(0.0, eps, 1.0))
    segs.append(Segment.constant(eps, rho, -1.0))
    return DdeSpec(PiecewiseFn(segs), DelayFn.lag(0.0, rho, tau), 0.0, hist, name=f"decay tau={tau}")


def _gap_fn(tau: float, rho: float, eps: float):
    """For fixed eps, y is affine in the dip depth; return depth solving y(rho) = 0 and the trajectory."""
    y0 = float(eval_fn(integrate(_decay_spec(tau, rho, eps, 0.0), rho), rho))
    y1 = float(eval_fn(integrate(_decay_spec(tau, rho, eps, 1.0), rho), rho))
    if y0 == y1:
        raise ConstructionError("depth has no effect on the end value")
    depth = y0 / (y0 - y1)
    return depth


def decay_bound(tau: float, delta: float, per_unit: int = 2000) -> DecayProbe:
    """Admissible ``y`` with ``a(rho - tau) = delta`` and a large gap at 0.

    ``y`` follows ``x_tau``'s equation except on ``[0, eps]`` where the feedback
    is reversed; its history dips by ``depth`` just before 0.  For each ``eps``
    the depth making ``y(rho) = 0`` is exact (linearity), and ``eps`` is found by
    bisection on ``a(rho - tau) = delta``.  The gap then behaves like
    ``sqrt(delta)`` near 0.
    """
    tau = check_tau(tau)
    if not tau < 1.0:
        raise DomainError("decay_bound needs tau < 1")
    if not 0.0 <= delta < 1.0:
        raise DomainError("delta must lie in [0, 1)")
    rec = myshkis_solution(tau)
    rho = rec.rho
    m = int(math.floor(rho / tau))
    exponent = 2.0 ** (-m)
    eps_max = min(rho - tau, tau) / (1.0 + DIP_FRACTION)
    if eps_max <= 0.0:
        raise ConstructionError("no room for the reversed-feedback start")

    def gap_at(eps: float) -> float:
        depth = _gap_fn(tau, rho, eps)
        y = integrate(_decay_spec(tau, rho, eps, depth), rho)
        return float(rec.x_tau(rho - tau) - eval_fn(y, rho - tau))

    if delta == 0.0:
        eps, depth = 0.0, 0.0
    else:
        g_hi = gap_at(eps_max)
        if g_hi < delta:
            raise ConstructionError(f"delta={delta} is too large to realize for tau={tau}")
        eps = bisect_root(lambda e: gap_at(e) - delta, 0.0, eps_max, fa=gap_at(0.0) - delta)
        depth = _gap_fn(tau, rho, eps)
    spec = _decay_spec(tau, rho, eps, depth)
    y = integrate(spec, rho)
    t = np.linspace(0.0, rho, max(3, int(math.ceil(rho * per_unit)) + 1))
    yv = eval_fn(y, t)
    hv = eval_fn(y, np.linspace(-tau, 0.0, 200))
    a = rec.x_tau(t) - yv
    lo = min(float(yv[:-1].min()), float(hv.min()))
    hi = max(float(yv.max()), float(hv.max()))
    inner = _first_root(y, 0.0, rho)
    if lo < -1e-12 or hi > 1.0 + 1e-12 or (inner is not None and inner < rho - 1e-9):
        raise ConstructionError(f"construction left the admissible range for delta={delta}")
    head = t <= rho - tau + 1e-15
    amax = float(np.max(a[head]))
    C = amax / delta ** exponent if delta > 0 else 0.0
    extras = {"rho": rho, "floor_rho_over_tau": m, "y_rho": float(eval_fn(y, rho)),
              "a_rho_minus_tau": float(rec.x_tau(rho - tau) - eval_fn(y, rho - tau))}
    return DecayProbe(tau, delta, t, a, exponent, C, eps, float(a[0]), y, extras)


def decay_sweep(tau: float, deltas=DELTAS) -> list:
    """``decay_bound`` over several deltas, in input order."""
    return [decay_bound(tau, d) for d in deltas]
