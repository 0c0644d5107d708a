"""Method-of-steps integration of x'(t) = p(t) x(tau(t)).

Time is cut into cells on which ``p`` is a single closed-form segment and the
delay is affine, ``tau(t) = start + slope*(t - left)``.  A cell is further cut
so that every delayed argument falls into already-known territory and into a
single known segment; on each such piece the right-hand side is closed-form
and is integrated exactly.  Cells with ``tau(t) = t`` are solved as the local
flow ``x' = p x``.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .errors import ExactModeError, InvariantError, SpecError
from .piecewise import (DomainError, PiecewiseFn, Segment, Trajectory, eval_fn)

DEFAULT_STEP = 1e-4
_MERGE = 1e-11  # split points closer than this (relative) are merged


def _close(a: float, b: float, rel: float = _MERGE) -> bool:
    return abs(a - b) <= rel * max(1.0, abs(a), abs(b))


@dataclass(frozen=True)
class DelayPiece:
    left: float
    right: float
    start: float  # tau(left+)
    slope: float

    def __call__(self, t):
        return self.start + self.slope * (np.asarray(t, dtype=float) - self.left)

    @property
    def end(self) -> float:
        """Left limit of tau at ``right``."""
        return self.start + self.slope * (self.right - self.left)

    def is_identity(self) -> bool:
        return abs(self.slope - 1.0) <= 1e-12 and _close(self.start, self.left, 1e-13)


class DelayFn:
    """Piecewise-affine delay with nonnegative slopes.

    With ``shift_period`` set the delay obeys ``tau(t + P) = tau(t) + P`` and
    the base pieces describe one period.
    """

    def __init__(self, base: PiecewiseFn, shift_period: Optional[float] = None):
        if base.periodicity is not None:
            raise SpecError("delay base must be non-periodic; use shift_period")
        for seg in base.segments:
            if seg.kind not in ("constant", "affine"):
                raise SpecError("delay segments must be affine")
            if self._slope(seg) < 0:
                raise SpecError("delay slopes must be nonnegative")
        if shift_period is not None:
            if not shift_period > 0:
                raise SpecError("shift period must be positive")
            if not _close(base.end - base.start, shift_period, 1e-9):
                raise SpecError("delay base length must equal the shift period")
        self.base = base
        self.shift_period = shift_period
        self._pieces = [DelayPiece(s.left, s.right, s.value_at_left(), self._slope(s)) for s in base.segments]
        self._lefts = [p.left for p in self._pieces]
        self._lefts_arr = np.array(self._lefts)
        self._starts = np.array([p.start for p in self._pieces])
        self._slopes = np.array([p.slope for p in self._pieces])

    @staticmethod
    def _slope(seg: Segment) -> float:
        coeffs = seg.terms[0][1]
        return float(coeffs[1]) if len(coeffs) > 1 else 0.0

    # -- constructors -------------------------------------------------------
    @classmethod
    def from_pieces(cls, pieces, shift_period: Optional[float] = None) -> "DelayFn":
        """Build from ``(left, right, start, slope)`` tuples."""
        segs = [Segment(l, r, [(0.0, [s, k] if k else [s])]) for l, r, s, k in pieces]
        return cls(PiecewiseFn(segs), shift_period)

    @classmethod
    def lag(cls, left: float, right: float, lag: float) -> "DelayFn":
        return cls.from_pieces([(left, right, left - lag, 1.0)])

    @classmethod
    def identity(cls, left: float, right: float) -> "DelayFn":
        return cls.from_pieces([(left, right, left, 1.0)])

    # -- evaluation -------------------------------------------------------
    @property
    def domain(self) -> tuple[float, float]:
        if self.shift_period is None:
            return self.base.start, self.base.end
        return -math.inf, math.inf

    def _locate(self, t: float) -> tuple[DelayPiece, float]:
        """Piece containing ``t`` (right-continuous) and the shift applied."""
        shift = 0.0
        if self.shift_period is not None:
            P = self.shift_period
            k = math.floor((t - self.base.start) / P)
            shift = k * P
            if t - shift >= self.base.end:
                shift += P
        else:
            tol = 1e-12 * max(1.0, abs(self.base.start), abs(self.base.end))
            if t < self.base.start - tol or t > self.base.end + tol:
                raise DomainError(f"delay undefined at t={t}")
        i = max(0, min(bisect.bisect_right(self._lefts, t - shift) - 1, len(self._pieces) - 1))
        return self._pieces[i], shift

    def __call__(self, t):
        scalar = np.ndim(t) == 0
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        if self.shift_period is None:
            lo, hi = self.base.start, self.base.end
            tol = 1e-12 * max(1.0, abs(lo), abs(hi))
            if np.any(tt < lo - tol) or np.any(tt > hi + tol):
                bad = tt[(tt < lo - tol) | (tt > hi + tol)][0]
                raise DomainError(f"delay undefined at t={bad}")
            shift = np.zeros_like(tt)
        else:
            P = self.shift_period
            shift = np.floor((tt - self.base.start) / P) * P
            shift = np.where(tt - shift >= self.base.end, shift + P, shift)
        r = tt - shift
        i = np.clip(np.searchsorted(self._lefts_arr, r, side="right") - 1, 0, len(self._pieces) - 1)
        out = self._starts[i] + self._slopes[i] * (r - self._lefts_arr[i]) + shift
        return float(out[0]) if scalar else out

    def pieces_between(self, a: float, b: float) -> Iterator[DelayPiece]:
        """Concrete (unrolled) pieces overlapping ``[a, b]``."""
        if self.shift_period is None:
            lo, hi = self.domain
            tol = 1e-12 * max(1.0, abs(lo), abs(hi))
            if a < lo - tol or b > hi + tol:
                raise DomainError(f"delay undefined on [{a}, {b}] (domain [{lo}, {hi}])")
            for p in self._pieces:
                if p.right > a and (p.left < b or p.left <= a):
                    yield p
            return
        P = self.shift_period
        k = math.floor((a - self.base.start) / P)
        while self.base.start + k * P < b or k * P + self.base.start <= a:
            s = k * P
            for p in self._pieces:
                if p.right + s <= a:
                    continue
                if p.left + s >= b and p.left + s > a:
                    break
                yield DelayPiece(p.left + s, p.right + s, p.start + s, p.slope)
            k += 1

    @property
    def breakpoints(self) -> np.ndarray:
        return self.base.breakpoints

    def max_lag(self, a: float, b: float) -> float:
        """sup of ``t - tau(t)`` over ``[a, b]`` (affine pieces: endpoint values)."""
        best = -math.inf
        for p in self.pieces_between(a, b):
            lo, hi = max(p.left, a), min(p.right, b)
            best = max(best, lo - float(p(lo)), hi - float(p(hi)))
        return best

    def min_value(self, a: float, b: float) -> float:
        best = math.inf
        for p in self.pieces_between(a, b):
            lo, hi = max(p.left, a), min(p.right, b)
            best = min(best, float(p(lo)), float(p(hi)))
        return best

    def to_dict(self) -> dict:
        return {"pieces": [[p.left, p.right, p.start, p.slope] for p in self._pieces],
                "shift_period": self.shift_period}

    @classmethod
    def from_dict(cls, d: dict) -> "DelayFn":
        return cls.from_pieces([tuple(x) for x in d["pieces"]], d.get("shift_period"))


@dataclass
class DdeSpec:
    """One problem instance: coefficient, delay, initial time and history."""

    p: PiecewiseFn
    tau: DelayFn
    t0: float
    history: PiecewiseFn
    normalized: bool = True
    name: str = ""

    def __post_init__(self):
        self.t0 = float(self.t0)
        if self.normalized:
            for seg in self._p_segments_sample():
                u = np.linspace(seg.left, seg.right, 5 + 2 * seg.degree)
                if np.max(np.abs(seg(u))) > 1.0 + 1e-12:
                    raise SpecError("|p| exceeds 1 on a spec flagged normalized")
        h_lo, h_hi = self.history.domain
        if self.history.periodicity is None and not (h_lo <= self.t0 + 1e-12 and h_hi >= self.t0 - 1e-12):
            raise SpecError(f"history domain [{h_lo}, {h_hi}] does not reach t0={self.t0}")

    def _p_segments_sample(self):
        if self.p.periodicity is not None:
            return self.p.segments
        return [s for s in self.p.segments if s.right > self.t0]

    def horizon_end(self) -> float:
        """Largest time up to which both p and tau are defined."""
        ends = [self.tau.domain[1]]
        ends.append(math.inf if self.p.periodicity is not None else self.p.end)
        return min(ends)

    @property
    def tau_m(self) -> float:
        """sup of the lag over the defined part of ``[t0, inf)``."""
        if self.tau.shift_period is not None:
            return self.tau.max_lag(self.t0, self.t0 + self.tau.shift_period)
        return self.tau.max_lag(self.t0, self.tau.domain[1])

    def history_start(self, t_end: float) -> float:
        return min(self.t0, self.tau.min_value(self.t0, t_end))

    def scaled_history(self, c: float) -> "DdeSpec":
        return DdeSpec(self.p, self.tau, self.t0, self.history.scaled(c), self.normalized, self.name)

    def with_history(self, history: PiecewiseFn, t0: Optional[float] = None) -> "DdeSpec":
        return DdeSpec(self.p, self.tau, self.t0 if t0 is None else t0, history, self.normalized, self.name)

    def to_dict(self) -> dict:
        return {"name": self.name, "t0": self.t0, "normalized": self.normalized,
                "p": self.p.to_dict(), "tau": self.tau.to_dict(), "history": self.history.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "DdeSpec":
        try:
            return cls(PiecewiseFn.from_dict(d["p"]), DelayFn.from_dict(d["tau"]), d["t0"],
                       PiecewiseFn.from_dict(d["history"]), d.get("normalized", True), d.get("name", ""))
        except KeyError as exc:
            raise SpecError(f"spec document lacks field {exc}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "DdeSpec":
        return cls.from_dict(json.loads(text))


# -- cell decomposition -------------------------------------------------------

@dataclass
class _Cell:
    left: float
    right: float
    p: Segment
    tau: DelayPiece


def _cells(spec: DdeSpec, a: float, b: float) -> list:
    pts = {a, b}
    p_segs = list(spec.p.segments_between(a, b))
    d_pcs = list(spec.tau.pieces_between(a, b))
    for s in p_segs:
        if a < s.left < b:
            pts.add(s.left)
    for d in d_pcs:
        if a < d.left < b:
            pts.add(d.left)
    pts = sorted(pts)
    merged = [pts[0]]
    for t in pts[1:]:
        if not _close(t, merged[-1]):
            merged.append(t)
    merged[-1] = b
    if len(merged) == 1:
        merged.append(b)
    cells = []
    p_lefts = [s.left for s in p_segs]
    d_lefts = [d.left for d in d_pcs]
    for lo, hi in zip(merged, merged[1:]):
        mid = 0.5 * (lo + hi)
        ps = p_segs[max(0, bisect.bisect_right(p_lefts, mid) - 1)]
        dp = d_pcs[max(0, bisect.bisect_right(d_lefts, mid) - 1)]
        cells.append(_Cell(lo, hi, ps, dp))
    return cells


class _Known:
    """Exact segments known so far, searchable by time."""

    def __init__(self, segs):
        self.segs = list(segs)
        self.lefts = [s.left for s in self.segs]

    @property
    def end(self) -> float:
        return self.segs[-1].right

    def append(self, seg: Segment):
        self.segs.append(seg)
        self.lefts.append(seg.left)

    def index(self, t: float) -> int:
        return max(0, min(bisect.bisect_right(self.lefts, t) - 1, len(self.segs) - 1))

    def value(self, t: float) -> float:
        return float(self.segs[self.index(t)](t))

    def last_value(self) -> float:
        return self.segs[-1].value_at_right()


def _check_cell(cell: _Cell):
    tol = 1e-10 * max(1.0, abs(cell.left), abs(cell.right))
    if cell.tau.start > cell.left + tol or cell.tau(cell.right) > cell.right + tol:
        raise InvariantError(f"tau(t) > t on [{cell.left}, {cell.right}]")


MAX_SUBCELLS = 20_000


def _subcells(cell: _Cell, min_width: float = 0.0) -> Iterator[tuple[float, float]]:
    """Cut a delayed cell so that ``tau(b) <= a`` on each piece ``[a, b]``.

    With ``min_width`` (grid mode) pieces are never narrower than that; lags
    shorter than it then read the latest known sample.
    """
    a, d = cell.left, cell.right
    k = cell.tau.slope
    guard = 0
    lag0 = a - float(cell.tau(a))
    exact = min_width == 0.0
    if exact and k == 1.0 and lag0 > 0.0 and (d - a) / lag0 > MAX_SUBCELLS:
        # constant lag: the step count is known before any work is done
        raise ExactModeError(f"delay lag {lag0:g} near t={a} too small for exact steps; use grid mode")
    while not _close(a, d) and a < d:
        ta = float(cell.tau(a))
        gap = a - ta
        if k == 0.0:
            b = d
        else:
            if exact and gap <= _MERGE * max(1.0, abs(a)):
                raise InvariantError(f"delay lag collapses to zero near t={a}")
            b = min(d, a + max(gap / k, min_width))
            if _close(b, d):
                b = d
        yield a, b
        a = b
        guard += 1
        if exact and guard > MAX_SUBCELLS:
            raise ExactModeError(f"delay lag near t={a} too small for exact steps; use grid mode")


def _history_segments(spec: DdeSpec, lo: float) -> list:
    if lo >= spec.t0 or _close(lo, spec.t0, 1e-13):
        # no history needed beyond the initial value
        return [spec.history.unrolled(spec.t0 - 1e-9, spec.t0).segments[-1].restricted(spec.t0 - 1e-9, spec.t0)]
    try:
        return list(spec.history.unrolled(lo, spec.t0).segments)
    except DomainError:
        h_lo, _ = spec.history.domain
        raise SpecError(f"delay reaches t={lo} before the history start {h_lo}") from None


def integrate(spec: DdeSpec, t_end: float, step: float = DEFAULT_STEP, exact: bool = True) -> Trajectory:
    """Solve ``spec`` on ``[t0, t_end]``.

    The returned trajectory also carries the history from the earliest delayed
    argument, so it can be evaluated wherever ``x(tau(t))`` is needed.
    """
    if not t_end > spec.t0:
        raise SpecError("t_end must exceed t0")
    if t_end > spec.horizon_end() + 1e-12:
        raise SpecError(f"coefficients are defined only up to t={spec.horizon_end()}")
    lo = spec.history_start(t_end)
    cells = _cells(spec, spec.t0, t_end)
    for c in cells:
        _check_cell(c)
    hist = _history_segments(spec, lo)
    if exact:
        return _integrate_exact(spec, cells, hist)
    return _integrate_grid(spec, cells, hist, lo, step)


def _integrate_exact(spec: DdeSpec, cells, hist) -> Trajectory:
    known = _Known(hist)
    n_hist = len(known.segs)
    x_c = known.last_value()
    for cell in cells:
        pseg = cell.p
        pconst = pseg.constant_value()
        c, d = cell.left, cell.right
        if pconst == 0.0:
            known.append(Segment.constant(c, d, x_c))
        elif cell.tau.is_identity():
            if pconst is None:
                raise ExactModeError(f"tau(t)=t with non-constant p on [{c}, {d}] has no supported closed form")
            known.append(Segment(c, d, [(pconst, [x_c])]))
        elif cell.tau.slope == 0.0:
            X = known.value(cell.tau.start)
            known.append(pseg.restricted(c, d).scaled(X).antiderivative(x_c))
        else:
            for a, b in _subcells(cell):
                _exact_delayed(known, cell, a, b)
        x_c = known.last_value()
    exact = PiecewiseFn(known.segs)
    traj = Trajectory(exact=exact, meta=spec.name)
    traj.t0 = spec.t0
    traj.n_history = n_hist
    return traj


def _exact_delayed(known: _Known, cell: _Cell, a: float, b: float):
    k = cell.tau.slope
    ta, tb = float(cell.tau(a)), float(cell.tau(b))
    # images of known breakpoints inside (ta, tb)
    i0, i1 = known.index(ta), known.index(tb)
    cuts = [a]
    for i in range(i0 + 1, i1 + 1):
        q = known.lefts[i]
        if ta < q < tb:
            t = a + (q - ta) / k
            if not _close(t, cuts[-1]) and not _close(t, b):
                cuts.append(t)
    cuts.append(b)
    x_a = known.last_value()
    for lo, hi in zip(cuts, cuts[1:]):
        mid_arg = float(cell.tau(0.5 * (lo + hi)))
        src = known.segs[known.index(mid_arg)]
        delayed = src.composed(lo, hi, float(cell.tau(lo)), k)
        rhs = delayed.times(cell.p)
        seg = rhs.antiderivative(x_a)
        known.append(seg)
        x_a = seg.value_at_right()


class _GrowBuf:
    def __init__(self, cap=1024):
        self.t = np.empty(cap)
        self.x = np.empty(cap)
        self.n = 0

    def extend(self, t, x):
        m = len(t)
        while self.n + m > len(self.t):
            self.t = np.resize(self.t, 2 * len(self.t))
            self.x = np.resize(self.x, 2 * len(self.x))
        self.t[self.n:self.n + m] = t
        self.x[self.n:self.n + m] = x
        self.n += m

    def view(self):
        return self.t[: self.n], self.x[: self.n]


def _integrate_grid(spec: DdeSpec, cells, hist, lo: float, step: float) -> Trajectory:
    """Trapezoid rule on a cell-aligned grid with linear interpolation of delayed values."""
    hist_fn = PiecewiseFn(hist)
    buf = _GrowBuf()
    x0 = float(hist_fn(spec.t0))
    buf.extend([spec.t0], [x0])

    breaks = [spec.t0]

    def delayed(args):
        out = np.empty_like(args)
        m = args < spec.t0
        if np.any(m):
            out[m] = hist_fn(np.maximum(args[m], hist_fn.start))
        if np.any(~m):
            tg, xg = buf.view()
            out[~m] = np.interp(args[~m], tg, xg)
        return out

    for cell in cells:
        c, d = cell.left, cell.right
        pconst = cell.p.constant_value()
        x_c = buf.x[buf.n - 1]
        if pconst == 0.0:
            t = _grid(c, d, step)
            buf.extend(t[1:], np.full(len(t) - 1, x_c))
            continue
        if cell.tau.is_identity():
            t = _grid(c, d, step)
            if pconst is not None:
                x = x_c * np.exp(pconst * (t - c))
            else:
                pv = cell.p(t)
                cum = np.concatenate([[0.0], np.cumsum(0.5 * (pv[1:] + pv[:-1]) * np.diff(t))])
                x = x_c * np.exp(cum)
            buf.extend(t[1:], x[1:])
            continue
        pieces = [(c, d)] if cell.tau.slope == 0.0 else list(_subcells(cell, step))
        for a, b in pieces:
            breaks.append(a)
            t = _grid(a, b, step)
            f = cell.p(t) * delayed(cell.tau(t))
            x_a = buf.x[buf.n - 1]
            x = x_a + np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(t))])
            buf.extend(t[1:], x[1:])
    tg, xg = buf.view()
    if lo < spec.t0:
        th = _grid(lo, spec.t0, step)[:-1]
        tg = np.concatenate([th, tg])
        xg = np.concatenate([hist_fn(th), xg])
    traj = Trajectory(tg.copy(), xg.copy(), meta=spec.name)
    traj.t0 = spec.t0
    traj.breaks = np.array(sorted(set(breaks) | {c.left for c in cells}))
    return traj


def _grid(a: float, b: float, step: float) -> np.ndarray:
    n = max(1, int(math.ceil((b - a) / step - 1e-9)))
    return np.linspace(a, b, n + 1)


# -- residual ------------------------------------------------------------------

def _spec_breakpoints(spec: DdeSpec, a: float, b: float) -> np.ndarray:
    pts = []
    plo, phi = (-math.inf, math.inf) if spec.p.periodicity is not None else spec.p.domain
    if max(a, plo) < min(b, phi):
        pts += [s.left for s in spec.p.segments_between(max(a, plo), min(b, phi))]
        pts += [phi] if math.isfinite(phi) else []
    dlo, dhi = spec.tau.domain
    if max(a, dlo) < min(b, dhi):
        pts += [q.left for q in spec.tau.pieces_between(max(a, dlo), min(b, dhi))]
        pts += [dhi] if math.isfinite(dhi) else []
    return np.array(sorted(pts))


def residual(x, spec: DdeSpec, probe=None, exclude: Optional[float] = None) -> float:
    """ess-sup of ``|x'(t) - p(t) x(tau(t))|`` over probe points.

    ``x`` may be a Trajectory or PiecewiseFn; delayed arguments before its span
    are read from the spec history.  Points within ``exclude`` of a breakpoint
    (of x, p or tau) are skipped.
    """
    if isinstance(x, PiecewiseFn):
        x = Trajectory(exact=x)
    lo, hi = x.span
    a = max(lo, spec.t0)
    if probe is None:
        if not math.isfinite(hi):
            raise SpecError("a probe grid is required for periodic trajectories")
        probe = np.linspace(a, hi, 20001)
    probe = np.asarray(probe, dtype=float)
    if probe.size == 0:
        return 0.0
    pa, pb = float(probe.min()), float(probe.max())
    if exclude is None:
        exclude = 1e-9 if x.is_exact else float(np.max(np.diff(x.grid)))
    bps = [_spec_breakpoints(spec, pa - 1, pb + 1)]
    if x.is_exact:
        xa, xb = pa - exclude, pb + exclude
        if x.exact.periodicity is None:
            xa, xb = max(xa, x.exact.start), min(xb, x.exact.end)
        bps.append(np.array([s.left for s in x.exact.segments_between(xa, xb)]))
    elif getattr(x, "breaks", None) is not None:
        bps.append(x.breaks)
    if not x.is_exact:
        probe = probe[(probe - exclude >= lo) & (probe + exclude <= hi)]
    bp = np.unique(np.concatenate(bps))
    if bp.size:
        idx = np.searchsorted(bp, probe)
        near = np.zeros(probe.shape, dtype=bool)
        for j in (idx - 1, idx):
            jj = np.clip(j, 0, bp.size - 1)
            near |= np.abs(probe - bp[jj]) <= exclude
        probe = probe[~near]
    if probe.size == 0:
        return 0.0
    if x.is_exact:
        dx = _exact_derivative(x.exact, probe)
    else:
        h = exclude
        dx = (eval_fn(x, probe + h) - eval_fn(x, probe - h)) / (2 * h)
    args = spec.tau(probe)
    xd = _eval_with_history(x, spec, args)
    res = np.abs(dx - spec.p(probe) * xd)
    return float(np.max(res))


def _exact_derivative(f: PiecewiseFn, t: np.ndarray) -> np.ndarray:
    out = np.empty_like(t)
    if f.periodicity is None:
        idx = f._segment_index(t)
        used = {int(i): f.segments[i].derivative() for i in np.unique(idx)}
        order = np.argsort(idx, kind="stable")
        ids, ts = idx[order], t[order]
        cuts = np.flatnonzero(np.diff(ids)) + 1
        vals = np.empty_like(ts)
        for a, b in zip(np.concatenate([[0], cuts]), np.concatenate([cuts, [len(ids)]])):
            vals[a:b] = used[int(ids[a])](ts[a:b])
        out[order] = vals
        return out
    return f.derivative()(t)


def _eval_with_history(x: Trajectory, spec: DdeSpec, args: np.ndarray) -> np.ndarray:
    lo, _ = x.span
    out = np.empty_like(args)
    before = args < lo
    if np.any(before):
        out[before] = spec.history(args[before])
    if np.any(~before):
        out[~before] = eval_fn(x, args[~before])
    return out
