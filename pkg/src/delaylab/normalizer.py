"""Change of time to |p| = 1, and the absolute-value transform of a solution.

The new time is ``s = f(t) = t0 + int_{t0}^t |p|`` (identity before ``t0``).
Stretches where ``p`` vanishes are collapsed: the solution is constant there.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dde import DdeSpec, DelayFn, _close, integrate
from .errors import SpecError
from .piecewise import PiecewiseFn, Segment, Trajectory, find_roots

_SLOPE_SNAP = 1e-12


@dataclass(frozen=True)
class TimeRescaleMap:
    """Piecewise-linear f through knots (t_i, s_i) and its generalized inverse g."""

    t_knots: np.ndarray
    s_knots: np.ndarray

    @property
    def t0(self) -> float:
        return float(self.t_knots[0])

    def f(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t > self.t_knots[-1] + 1e-12):
            raise SpecError("f evaluated past the rescaled horizon")
        return np.where(t <= self.t0, t, np.interp(t, self.t_knots, self.s_knots))

    def g(self, s):
        """inf{t >= t0 : f(t) = s}; the identity below t0."""
        scalar = np.ndim(s) == 0
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if np.any(s > self.s_knots[-1] + 1e-12):
            raise SpecError("g evaluated past the rescaled horizon")
        out = s.copy()
        m = s > self.t0
        if np.any(m):
            sk, tk = self.s_knots, self.t_knots
            sm = s[m]
            j = np.clip(np.searchsorted(sk, sm, side="left"), 1, len(sk) - 1)
            on_knot = sk[j] == sm  # first knot carrying the value: left end of a plateau
            width = np.where(sk[j] > sk[j - 1], sk[j] - sk[j - 1], 1.0)
            val = tk[j - 1] + (sm - sk[j - 1]) / width * (tk[j] - tk[j - 1])
            out[m] = np.where(on_knot, tk[j], val)
        return float(out[0]) if scalar else out

    def to_dict(self) -> dict:
        slopes = np.diff(self.s_knots) / np.diff(self.t_knots)
        return {"breakpoints": self.t_knots.tolist(), "values": self.s_knots.tolist(),
                "slopes": slopes.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _abs_levels(spec: DdeSpec, t_end: float):
    segs = []
    for seg in spec.p.segments_between(spec.t0, t_end):
        lo, hi = max(seg.left, spec.t0), min(seg.right, t_end)
        if hi - lo <= 0:
            continue
        c = seg.constant_value()
        if c is None:
            raise SpecError("time rescaling supports piecewise-constant coefficients only")
        segs.append((lo, hi, c))
    return segs


def time_rescale(spec: DdeSpec, t_end: Optional[float] = None) -> tuple[DdeSpec, TimeRescaleMap]:
    """Equivalent problem with |p| = 1, on new times ``[t0, f(t_end)]``."""
    if t_end is None:
        t_end = spec.horizon_end()
        if not math.isfinite(t_end):
            raise SpecError("periodic coefficients need an explicit t_end")
    cells = _abs_levels(spec, t_end)
    if not cells or cells[-1][2] == 0.0:
        raise SpecError("p vanishes at the end of the horizon: unbounded plateau")
    tk = [spec.t0]
    sk = [spec.t0]
    for lo, hi, c in cells:
        tk.append(hi)
        sk.append(sk[-1] + abs(c) * (hi - lo))
    fmap = TimeRescaleMap(np.array(tk), np.array(sk))

    def f_piece(arg_lo: float, arg_hi: float):
        """Split points and slopes of f over an argument range (in t)."""
        pts = [arg_lo]
        for t in tk[1:-1]:
            if arg_lo < t < arg_hi:
                pts.append(t)
        if arg_lo < spec.t0 < arg_hi:
            pts.append(spec.t0)
            pts.sort()
        pts.append(arg_hi)
        return pts

    p_new, d_new = [], []
    for (lo, hi, c), s_lo, s_hi in zip(cells, sk[:-1], sk[1:]):
        if c == 0.0:
            continue  # collapsed plateau
        sign = 1.0 if c > 0 else -1.0
        p_new.append(Segment.constant(s_lo, s_hi, sign))
        rate = abs(c)
        for dp in spec.tau.pieces_between(lo, hi):
            a, b = max(dp.left, lo), min(dp.right, hi)
            if b - a <= 0:
                continue
            # delay piece in new time: tau(g(s)) is affine with slope dp.slope / rate
            sa = s_lo + rate * (a - lo)
            sb = s_lo + rate * (b - lo)
            ta, tb = float(dp(a)), float(dp(a) + dp.slope * (b - a))
            if dp.slope == 0.0:
                fv = float(fmap.f(ta))
                d_new.append((sa, sb, fv, 0.0))
                continue
            pts = f_piece(ta, tb)
            for u0, u1 in zip(pts, pts[1:]):
                if u1 - u0 <= 1e-14 * max(1.0, abs(u1)):
                    continue
                s0 = sa + (u0 - ta) / dp.slope * rate
                s1 = sa + (u1 - ta) / dp.slope * rate
                f0, f1 = float(fmap.f(u0)), float(fmap.f(u1))
                k = (f1 - f0) / (s1 - s0)
                if abs(k - 1.0) <= _SLOPE_SNAP:
                    k = 1.0
                if abs(k) <= _SLOPE_SNAP:
                    k = 0.0
                d_new.append((s0, s1, f0, k))
            # pin the last piece to the cell end
            if d_new and d_new[-1][1] != sb:
                l0, _, st, k = d_new[-1]
                d_new[-1] = (l0, sb, st, k)
    d_new = _merge_delay(d_new)
    p_fn = PiecewiseFn(p_new)
    delay = DelayFn.from_pieces(d_new)
    out = DdeSpec(p_fn, delay, spec.t0, spec.history, normalized=True,
                  name=(spec.name + " rescaled") if spec.name else "rescaled")
    return out, fmap


def _merge_delay(pieces):
    """Drop slivers left by rounding and force exact tiling."""
    out = []
    for l, r, st, k in pieces:
        if out and not _close(out[-1][1], l, 1e-12):
            raise SpecError("rescaled delay does not tile")
        if r - l <= 1e-13 * max(1.0, abs(r)):
            if out:
                pl, _, pst, pk = out[-1]
                out[-1] = (pl, r, pst, pk)
            continue
        if out:
            l = out[-1][1]
        out.append((l, r, st, k))
    return out


# -- absolute value transform ----------------------------------------------------

def _abs_exact(fn: PiecewiseFn, a: float, b: float, roots) -> PiecewiseFn:
    cuts = sorted(set([r for r in roots if a < r < b]))
    segs = []
    for seg in fn.segments_between(a, b):
        lo, hi = max(seg.left, a), min(seg.right, b)
        if hi - lo <= 1e-14 * max(1.0, abs(hi)):
            continue
        inner = [c for c in cuts if lo < c < hi and not _close(c, lo, 1e-13) and not _close(c, hi, 1e-13)]
        pts = [lo] + inner + [hi]
        for u0, u1 in zip(pts, pts[1:]):
            piece = seg if (u0 == seg.left and u1 == seg.right) else seg.restricted(u0, u1)
            mid = float(piece(0.5 * (u0 + u1)))
            segs.append(piece.scaled(-1.0) if mid < 0 else piece)
    return PiecewiseFn(segs)


def abs_transform(x: Trajectory, spec: DdeSpec, window: Optional[tuple] = None):
    """|x| and the problem it solves, with coefficient sgn(x(t) x(tau(t))) p(t).

    Returns ``(abs_trajectory, abs_spec, gaps)``; ``gaps`` lists the times where
    the sign factor is undefined (roots of x and their delay preimages), where
    the coefficient keeps the value of p.
    """
    if isinstance(x, PiecewiseFn):
        x = Trajectory(exact=x)
    lo_span, hi_span = x.span
    if window is None:
        if not math.isfinite(hi_span):
            raise SpecError("periodic trajectories need an explicit window")
        window = (spec.t0, hi_span)
    a, b = float(window[0]), float(window[1])
    h_lo = spec.history_start(b)
    if math.isfinite(lo_span):
        h_lo = max(h_lo, lo_span)
    roots_x = list(find_roots(x, h_lo, b).points)
    # cell boundaries: p, tau, roots of x, and delay preimages of roots
    pts = {a, b}
    pts.update(s.left for s in spec.p.segments_between(a, b) if a < s.left < b)
    pieces = list(spec.tau.pieces_between(a, b))
    pts.update(d.left for d in pieces if a < d.left < b)
    pts.update(r for r in roots_x if a < r < b)
    gaps = [r for r in roots_x if a <= r <= b]
    for d in pieces:
        lo, hi = max(d.left, a), min(d.right, b)
        if d.slope == 0.0:
            continue
        for r in roots_x:
            t = lo + (r - float(d(lo))) / d.slope
            if lo < t < hi:
                pts.add(t)
                gaps.append(t)
    pts = sorted(pts)
    cuts = [pts[0]]
    for t in pts[1:]:
        if not _close(t, cuts[-1], 1e-12):
            cuts.append(t)
    cuts[-1] = b
    p_segs = []
    for u0, u1 in zip(cuts, cuts[1:]):
        mid = 0.5 * (u0 + u1)
        prod = float(x(mid)) * float(x(spec.tau(mid)) if spec.tau(mid) >= lo_span else spec.history(spec.tau(mid)))
        sign = 1.0 if prod >= 0 else -1.0
        pseg = next(s for s in spec.p.segments_between(mid, mid) if s.left <= mid <= s.right)
        pseg = pseg if (pseg.left == u0 and pseg.right == u1) else pseg.restricted(u0, u1)
        p_segs.append(pseg if sign > 0 else pseg.scaled(-1.0))
    p_new = PiecewiseFn(p_segs)
    d_pieces = []
    for d in pieces:
        lo, hi = max(d.left, a), min(d.right, b)
        if hi - lo > 0:
            d_pieces.append((lo, hi, float(d(lo)), d.slope))
    tau_new = DelayFn.from_pieces(d_pieces)
    if x.is_exact:
        abs_fn = _abs_exact(x.exact, h_lo, b, roots_x)
        abs_traj = Trajectory(exact=abs_fn, meta=x.meta + " abs")
    else:
        m = (x.grid >= h_lo) & (x.grid <= b)
        abs_traj = Trajectory(x.grid[m], np.abs(x.values[m]), meta=x.meta + " abs")
    hist = spec.history
    if h_lo < a:
        hroots = list(find_roots(Trajectory(exact=hist.unrolled(h_lo, a)), h_lo, a).points)
        hist = _abs_exact(hist, h_lo, a, hroots)
    else:
        hist = PiecewiseFn([Segment.constant(a - 1.0, a, abs(float(x(a))))])
    abs_spec = DdeSpec(p_new, tau_new, a, hist, normalized=spec.normalized,
                       name=(spec.name + " abs") if spec.name else "abs")
    return abs_traj, abs_spec, sorted(gaps)


@dataclass
class RoundTrip:
    """Discrepancies between a solution and its rescaled twin, both integrated exactly."""

    forward: float   # max |x(t) - z(f(t))|
    backward: float  # max |z(s) - x(g(s))|
    samples: int
    tau_m: float     # of the rescaled problem

    @property
    def error(self) -> float:
        return max(self.forward, self.backward)

    def to_dict(self) -> dict:
        return {"forward": self.forward, "backward": self.backward, "error": self.error,
                "samples": self.samples, "tau_m": self.tau_m}


def round_trip(spec: DdeSpec, t_end: float, samples: int = 2001, seed: int = 0) -> RoundTrip:
    """Integrate ``spec`` and its time-rescaled form separately and compare them."""
    norm, fmap = time_rescale(spec, t_end)
    s_end = float(fmap.s_knots[-1])
    x = integrate(spec, t_end)
    z = integrate(norm, s_end)
    rng = np.random.default_rng(seed)
    t = np.concatenate([np.linspace(spec.t0, t_end, samples), rng.uniform(spec.t0, t_end, samples)])
    s = np.concatenate([np.linspace(spec.t0, s_end, samples), rng.uniform(spec.t0, s_end, samples)])
    fwd = float(np.max(np.abs(x(t) - z(np.minimum(fmap.f(t), s_end)))))
    bwd = float(np.max(np.abs(z(s) - x(np.minimum(fmap.g(s), t_end)))))
    return RoundTrip(fwd, bwd, 2 * samples, norm.tau_m)
