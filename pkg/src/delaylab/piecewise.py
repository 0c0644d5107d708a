"""Exact piecewise-analytic functions and sampled trajectories.

Every segment is stored as a finite sum ``sum_k P_k(u) * exp(r_k * u)`` in the
local variable ``u = t - left``.  Constants, affine pieces, polynomials and
pure exponentials are special cases of this form, and the form is closed under
the operations the method of steps needs: integration, multiplication by a
polynomial, and composition with an affine change of argument.
"""

from __future__ import annotations

import csv
import io
import json
import math
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

# rates closer than this are merged into one exponential term
_RATE_TOL = 1e-13


class DomainError(ValueError):
    """Raised when a function is evaluated outside its domain."""


def _merge_terms(terms: Iterable[tuple[float, np.ndarray]]) -> tuple[tuple[float, np.ndarray], ...]:
    merged: list[list] = []
    for rate, coeffs in terms:
        coeffs = np.asarray(coeffs, dtype=float)
        for item in merged:
            if abs(item[0] - rate) <= _RATE_TOL * max(1.0, abs(rate)):
                n = max(len(item[1]), len(coeffs))
                acc = np.zeros(n)
                acc[: len(item[1])] += item[1]
                acc[: len(coeffs)] += coeffs
                item[1] = acc
                break
        else:
            merged.append([float(rate), coeffs.copy()])
    merged.sort(key=lambda it: it[0])
    out = []
    for rate, coeffs in merged:
        # trailing exact zeros only; tiny nonzero values are real data
        k = len(coeffs)
        while k > 1 and coeffs[k - 1] == 0.0:
            k -= 1
        out.append((rate, coeffs[:k]))
    if not out:
        out = [(0.0, np.zeros(1))]
    return tuple(out)


@lru_cache(maxsize=None)
def _pascal(n: int) -> np.ndarray:
    """Lower-triangular binomial table, ``C[k, j] = binom(k, j)``."""
    C = np.zeros((n, n))
    C[:, 0] = 1.0
    for k in range(1, n):
        C[k, 1 : k + 1] = C[k - 1, :k] + C[k - 1, 1 : k + 1]
    return C


def _compose_affine(coeffs: np.ndarray, offset: float, slope: float) -> np.ndarray:
    """Coefficients of P(offset + slope*v) in powers of v (binomial expansion)."""
    coeffs = np.asarray(coeffs, dtype=float)
    n = len(coeffs)
    if n == 1:
        return coeffs.copy()
    k = np.arange(n)
    # entry [k, j] = offset^(k - j) for k >= j
    diff = k[:, None] - k[None, :]
    opow = np.where(diff >= 0, float(offset) ** np.maximum(diff, 0), 0.0)
    return (coeffs @ (_pascal(n) * opow)) * float(slope) ** k


def _exp_antiderivative(coeffs: np.ndarray, rate: float) -> np.ndarray:
    """Q with Q' + rate*Q = P, so that (Q e^{rate u})' = P e^{rate u}."""
    q = np.zeros(len(coeffs))
    deriv = coeffs.copy()
    sign = 1.0
    j = 0
    while len(deriv) and np.any(deriv):
        q[: len(deriv)] += sign * deriv / rate ** (j + 1)
        deriv = npoly.polyder(deriv) if len(deriv) > 1 else np.zeros(0)
        sign = -sign
        j += 1
    return q


def _cancels(coeffs: np.ndarray, rate: float, length: float) -> bool:
    """True when the closed-form primitive of P e^{rate u} would lose many digits.

    Its coefficients scale like P^(j) / rate^(j+1); with a slow rate they dwarf
    the primitive itself and subtracting the constant cancels.
    """
    if abs(rate) * length > 2.0:
        return False
    scale = np.max(np.abs(coeffs)) * max(length, 1e-300)
    if scale == 0.0:
        return False
    deriv, worst, j = np.asarray(coeffs, dtype=float), 0.0, 0
    while len(deriv) and np.any(deriv):
        worst = max(worst, np.max(np.abs(deriv)) / abs(rate) ** (j + 1))
        deriv = npoly.polyder(deriv) if len(deriv) > 1 else np.zeros(0)
        j += 1
    return not worst < 30.0 * scale


def _taylor_times(coeffs: np.ndarray, rate: float, length: float) -> np.ndarray:
    """P(u) e^{rate u} as a polynomial, accurate to rounding for |rate u| <= 2 on [0, length]."""
    series, k, bound = [1.0], 0, 1.0
    z = abs(rate) * length
    while bound > 1e-18:
        k += 1
        series.append(series[-1] * rate / k)
        bound *= z / k
    return npoly.polymul(coeffs, np.array(series))


class Segment:
    """One closed-form piece on ``[left, right]``."""

    __slots__ = ("left", "right", "terms")

    def __init__(self, left: float, right: float, terms):
        left = float(left)
        right = float(right)
        if not (math.isfinite(left) and math.isfinite(right)) or not left < right:
            raise ValueError(f"segment needs finite left < right, got [{left}, {right}]")
        self.left = left
        self.right = right
        self.terms = _merge_terms(terms)
        for rate, coeffs in self.terms:
            if not (math.isfinite(rate) and np.all(np.isfinite(coeffs))):
                raise ValueError("segment coefficients must be finite")

    # -- constructors ---------------------------------------------------
    @classmethod
    def constant(cls, left, right, c) -> "Segment":
        return cls(left, right, [(0.0, [c])])

    @classmethod
    def affine(cls, left, right, a, b) -> "Segment":
        """``a + b*t`` in the global time variable."""
        return cls(left, right, [(0.0, [a + b * left, b])])

    @classmethod
    def polynomial(cls, left, right, coeffs, origin=None) -> "Segment":
        """Ascending coefficients in ``(t - origin)``; origin defaults to ``left``."""
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.size == 0:
            raise ValueError("polynomial coefficient sequence must be nonempty")
        if origin is not None and origin != left:
            coeffs = _compose_affine(coeffs, left - origin, 1.0)
        return cls(left, right, [(0.0, coeffs)])

    @classmethod
    def exponential(cls, left, right, c, t_ref=None, rate=1.0) -> "Segment":
        """``c * exp(rate * (t - t_ref))``."""
        t_ref = left if t_ref is None else t_ref
        return cls(left, right, [(rate, [c * math.exp(rate * (left - t_ref))])])

    # -- introspection ----------------------------------------------------
    @property
    def kind(self) -> str:
        if len(self.terms) == 1:
            rate, coeffs = self.terms[0]
            if rate == 0.0:
                return {1: "constant", 2: "affine"}.get(len(coeffs), "polynomial")
            if len(coeffs) == 1:
                return "exponential"
        return "polyexp"

    @property
    def degree(self) -> int:
        return max(len(c) for _, c in self.terms) - 1

    def __repr__(self):
        return f"Segment([{self.left:.6g}, {self.right:.6g}], {self.kind})"

    # -- evaluation -------------------------------------------------------
    def local(self, u):
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        for rate, coeffs in self.terms:
            val = npoly.polyval(u, coeffs)
            if rate != 0.0:
                val = val * np.exp(rate * u)
            out = out + val
        return out

    def __call__(self, t):
        return self.local(np.asarray(t, dtype=float) - self.left)

    def value_at_left(self) -> float:
        return float(sum(c[0] for _, c in self.terms))

    def value_at_right(self) -> float:
        return float(self.local(self.right - self.left))

    # -- algebra ----------------------------------------------------------
    def scaled(self, factor: float) -> "Segment":
        return Segment(self.left, self.right, [(r, factor * c) for r, c in self.terms])

    def moved(self, dt: float, sign: float = 1.0) -> "Segment":
        """Same shape translated by ``dt`` (local coefficients are unchanged)."""
        return Segment(self.left + dt, self.right + dt, [(r, sign * c) for r, c in self.terms])

    def restricted(self, left: float, right: float) -> "Segment":
        """The same function on a sub-interval, re-expanded about the new left end."""
        shift = left - self.left
        if shift == 0.0:
            return Segment(left, right, self.terms)
        terms = [(r, _compose_affine(c, shift, 1.0) * (math.exp(r * shift) if r else 1.0))
                 for r, c in self.terms]
        return Segment(left, right, terms)

    def derivative(self) -> "Segment":
        terms = []
        for rate, coeffs in self.terms:
            d = npoly.polyder(coeffs) if len(coeffs) > 1 else np.zeros(1)
            if rate != 0.0:
                pad = np.zeros(len(coeffs))
                pad[: len(d)] = d
                d = pad + rate * coeffs
            terms.append((rate, d))
        return Segment(self.left, self.right, terms)

    def antiderivative(self, value_at_left: float = 0.0) -> "Segment":
        """Primitive on this segment taking ``value_at_left`` at ``left``."""
        terms = []
        const = value_at_left
        for rate, coeffs in self.terms:
            if rate == 0.0:
                terms.append((0.0, npoly.polyint(coeffs)))
            elif _cancels(coeffs, rate, self.right - self.left):
                terms.append((0.0, npoly.polyint(_taylor_times(coeffs, rate, self.right - self.left))))
            else:
                q = _exp_antiderivative(coeffs, rate)
                terms.append((rate, q))
                const -= q[0]
        terms.append((0.0, [const]))
        return Segment(self.left, self.right, terms)

    def integral(self, a: float, b: float) -> float:
        prim = self.antiderivative()
        return float(prim(b) - prim(a))

    def times_poly(self, coeffs) -> "Segment":
        """Product with a polynomial given in this segment's local variable."""
        coeffs = np.asarray(coeffs, dtype=float)
        return Segment(self.left, self.right, [(r, npoly.polymul(c, coeffs)) for r, c in self.terms])

    def times(self, other: "Segment") -> "Segment":
        """Pointwise product; ``other`` is re-expanded about this segment's left end."""
        if other.left != self.left:
            other = other.restricted(self.left, self.right)
        terms = [(r1 + r2, npoly.polymul(c1, c2))
                 for r1, c1 in self.terms for r2, c2 in other.terms]
        return Segment(self.left, self.right, terms)

    def constant_value(self) -> Optional[float]:
        """The value if this segment is constant, else ``None``."""
        if len(self.terms) == 1 and self.terms[0][0] == 0.0 and len(self.terms[0][1]) == 1:
            return float(self.terms[0][1][0])
        if all(not np.any(c) for _, c in self.terms):
            return 0.0
        return None

    def composed(self, left: float, right: float, arg_at_left: float, slope: float) -> "Segment":
        """``t -> self(arg_at_left + slope*(t - left))`` on ``[left, right]``."""
        offset = arg_at_left - self.left
        terms = []
        for rate, coeffs in self.terms:
            c = _compose_affine(coeffs, offset, slope)
            if rate != 0.0:
                c = c * math.exp(rate * offset)
            terms.append((rate * slope, c))
        return Segment(left, right, terms)

    def is_zero(self, tol: float = 0.0) -> bool:
        if all(not np.any(c) for _, c in self.terms):
            return True
        if tol <= 0.0:
            return False
        u = np.linspace(0.0, self.right - self.left, 9 + 2 * self.degree)
        return bool(np.max(np.abs(self.local(u))) <= tol)

    # -- serialization ----------------------------------------------------
    def to_dict(self) -> dict:
        kind = self.kind
        d = {"kind": kind, "left": self.left, "right": self.right}
        rate, coeffs = self.terms[0]
        if kind == "constant":
            d["c"] = float(coeffs[0])
        elif kind == "affine":
            d["a"] = float(coeffs[0] - coeffs[1] * self.left)
            d["b"] = float(coeffs[1])
        elif kind == "polynomial":
            d["origin"] = self.left
            d["coeffs"] = [float(c) for c in coeffs]
        elif kind == "exponential":
            d.update(c=float(coeffs[0]), t_ref=self.left, rate=rate)
        else:
            d["terms"] = [{"rate": r, "coeffs": [float(x) for x in c]} for r, c in self.terms]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Segment":
        kind = d["kind"]
        left, right = d["left"], d["right"]
        if kind == "constant":
            return cls.constant(left, right, d["c"])
        if kind == "affine":
            return cls.affine(left, right, d["a"], d["b"])
        if kind == "polynomial":
            return cls.polynomial(left, right, d["coeffs"], d.get("origin", left))
        if kind == "exponential":
            return cls.exponential(left, right, d["c"], d.get("t_ref", left), d.get("rate", 1.0))
        if kind == "polyexp":
            return cls(left, right, [(t["rate"], t["coeffs"]) for t in d["terms"]])
        raise ValueError(f"unknown segment kind {kind!r}")


@dataclass(frozen=True)
class Periodicity:
    period: float
    sign: int = 1  # -1: antiperiodic, f(t + P) = -f(t)

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError("period must be positive")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")


class PiecewiseFn:
    """Ordered segments tiling ``[start, end]``, optionally (anti)periodic."""

    def __init__(self, segments: Sequence[Segment], periodicity: Optional[Periodicity] = None,
                 gap_tol: float = 1e-9):
        segments = list(segments)
        if not segments:
            raise ValueError("PiecewiseFn needs at least one segment")
        for a, b in zip(segments, segments[1:]):
            if abs(a.right - b.left) > gap_tol * max(1.0, abs(a.right)):
                raise ValueError(f"segments do not tile: gap/overlap at {a.right} vs {b.left}")
        self.segments = tuple(segments)
        self.periodicity = periodicity
        self.start = segments[0].left
        self.end = segments[-1].right
        if periodicity is not None:
            if abs((self.end - self.start) - periodicity.period) > 1e-9 * max(1.0, periodicity.period):
                raise ValueError("base domain length must equal the period")
        self._lefts = np.array([s.left for s in segments])

    # -- basic queries ------------------------------------------------------
    @property
    def domain(self) -> tuple[float, float]:
        return self.start, self.end

    @property
    def breakpoints(self) -> np.ndarray:
        return np.append(self._lefts, self.end)

    def __len__(self):
        return len(self.segments)

    def _reduce(self, t: np.ndarray):
        """Map times into the base domain; returns reduced times and sign factors."""
        if self.periodicity is None:
            tol = 1e-12 * max(1.0, abs(self.start), abs(self.end))
            if np.any(t < self.start - tol) or np.any(t > self.end + tol):
                bad = t[(t < self.start - tol) | (t > self.end + tol)][0]
                raise DomainError(f"t={bad} outside [{self.start}, {self.end}]")
            return np.clip(t, self.start, self.end), np.ones_like(t)
        P = self.periodicity.period
        k = np.floor((t - self.start) / P)
        r = t - k * P
        # guard against rounding pushing r to the right end
        over = r >= self.end
        k = np.where(over, k + 1, k)
        r = np.where(over, r - P, r)
        sign = np.where(np.mod(k, 2) == 0, 1.0, float(self.periodicity.sign))
        if self.periodicity.sign == 1:
            sign = np.ones_like(t)
        return np.clip(r, self.start, self.end), sign

    def _segment_index(self, t: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self._lefts, t, side="right") - 1
        return np.clip(idx, 0, len(self.segments) - 1)

    def __call__(self, t):
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        r, sign = self._reduce(t)
        if len(self.segments) == 1:
            out = self.segments[0](r)
        else:
            out = _grouped_eval(self.segments, self._segment_index(r), r)
        out = out * sign
        return float(out[0]) if scalar else out

    def derivative(self) -> "PiecewiseFn":
        return PiecewiseFn([s.derivative() for s in self.segments], self.periodicity)

    def segments_between(self, a: float, b: float) -> Iterator[Segment]:
        """Concrete segments (unrolled if periodic) overlapping ``[a, b]``."""
        if self.periodicity is None:
            tol = 1e-12 * max(1.0, abs(self.start), abs(self.end))
            if a < self.start - tol or b > self.end + tol:
                raise DomainError(f"[{a}, {b}] not inside [{self.start}, {self.end}]")
            i0 = int(self._segment_index(np.array([a]))[0])
            for seg in self.segments[i0:]:
                if seg.left >= b and seg.left > a:
                    break
                yield seg
            return
        P = self.periodicity.period
        k = math.floor((a - self.start) / P)
        while True:
            shift = k * P
            if self.start + shift >= b and self.start + shift > a:
                break
            sign = 1.0 if (self.periodicity.sign == 1 or k % 2 == 0) else -1.0
            for seg in self.segments:
                if seg.right + shift <= a:
                    continue
                if seg.left + shift >= b and seg.left + shift > a:
                    break
                yield seg.moved(shift, sign) if (shift or sign != 1.0) else seg
            k += 1

    def unrolled(self, a: float, b: float) -> "PiecewiseFn":
        """Non-periodic restriction to ``[a, b]``."""
        segs = []
        for seg in self.segments_between(a, b):
            lo, hi = max(seg.left, a), min(seg.right, b)
            if hi - lo <= 1e-14 * max(1.0, abs(hi)):
                continue
            segs.append(seg if (lo == seg.left and hi == seg.right) else seg.restricted(lo, hi))
        return PiecewiseFn(segs)

    def scaled(self, factor: float) -> "PiecewiseFn":
        return PiecewiseFn([s.scaled(factor) for s in self.segments], self.periodicity)

    def shifted(self, dt: float) -> "PiecewiseFn":
        """``t -> f(t + dt)``."""
        return PiecewiseFn([s.moved(-dt) for s in self.segments], self.periodicity)

    # -- serialization ----------------------------------------------------
    def to_dict(self) -> dict:
        d = {"segments": [s.to_dict() for s in self.segments]}
        if self.periodicity is not None:
            d["periodicity"] = {"period": self.periodicity.period, "sign": self.periodicity.sign}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PiecewiseFn":
        per = d.get("periodicity")
        return cls([Segment.from_dict(s) for s in d["segments"]],
                   Periodicity(per["period"], per["sign"]) if per else None)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "PiecewiseFn":
        return cls.from_dict(json.loads(text))

    @classmethod
    def constant(cls, left, right, c) -> "PiecewiseFn":
        return cls([Segment.constant(left, right, c)])


def _grouped_eval(segments, idx: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Evaluate ``segments[idx[j]](t[j])`` one group of equal indices at a time."""
    order = np.argsort(idx, kind="stable")
    ids = idx[order]
    ts = t[order]
    cuts = np.flatnonzero(np.diff(ids)) + 1
    starts = np.concatenate([[0], cuts])
    ends = np.concatenate([cuts, [len(ids)]])
    vals = np.empty_like(ts)
    for a, b in zip(starts, ends):
        vals[a:b] = segments[ids[a]](ts[a:b])
    out = np.empty_like(t)
    out[order] = vals
    return out


def integrate_segmentwise(f: PiecewiseFn, a: float, b: float) -> float:
    """Exact integral of ``f`` over ``[a, b]`` from closed-form antiderivatives."""
    if a == b:
        return 0.0
    if b < a:
        return -integrate_segmentwise(f, b, a)
    total = 0.0
    for seg in f.segments_between(a, b):
        lo, hi = max(seg.left, a), min(seg.right, b)
        if hi > lo:
            total += seg.integral(lo, hi)
    return total


class Trajectory:
    """A solution record: optional exact pieces plus a sampled grid.

    When ``exact`` is present the grid holds its breakpoints and evaluation is
    exact; otherwise values are linearly interpolated on the grid.
    """

    def __init__(self, grid=None, values=None, exact: Optional[PiecewiseFn] = None, meta: str = ""):
        if exact is not None and grid is None:
            if exact.periodicity is None:
                grid = exact.breakpoints
            else:
                grid = np.append(exact._lefts, exact.end)
            values = exact(grid)
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=float)
        if grid.shape != values.shape or grid.ndim != 1 or grid.size < 2:
            raise ValueError("grid and values must be 1-d arrays of equal length >= 2")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        self.grid = grid
        self.values = values
        self.exact = exact
        self.meta = meta

    @property
    def span(self) -> tuple[float, float]:
        if self.exact is not None:
            if self.exact.periodicity is not None:
                return -math.inf, math.inf
            return self.exact.domain
        return float(self.grid[0]), float(self.grid[-1])

    @property
    def is_exact(self) -> bool:
        return self.exact is not None

    def __call__(self, t):
        return eval_fn(self, t)

    def scaled(self, factor: float) -> "Trajectory":
        if self.exact is not None:
            return Trajectory(exact=self.exact.scaled(factor), meta=self.meta)
        return Trajectory(self.grid, factor * self.values, meta=self.meta)

    def sample(self, a: float, b: float, step: float = 1e-4) -> "Trajectory":
        """Grid-only copy on ``[a, b]`` (the dense fallback representation)."""
        n = max(2, int(math.ceil((b - a) / step)) + 1)
        grid = np.linspace(a, b, n)
        return Trajectory(grid, eval_fn(self, grid), meta=self.meta)

    def breakpoints_in(self, a: float, b: float) -> np.ndarray:
        if self.exact is None:
            return np.zeros(0)
        pts = [s.left for s in self.exact.segments_between(a, b)]
        pts = np.array([p for p in pts if a < p < b])
        return pts

    def to_dict(self) -> dict:
        d = {"meta": self.meta, "grid": self.grid.tolist(), "values": self.values.tolist()}
        if self.exact is not None:
            d["exact"] = self.exact.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Trajectory":
        if "exact" in d:
            return cls(exact=PiecewiseFn.from_dict(d["exact"]), meta=d.get("meta", ""))
        return cls(d["grid"], d["values"], meta=d.get("meta", ""))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Trajectory":
        return cls.from_dict(json.loads(text))


def eval_fn(f, t):
    """Evaluate a PiecewiseFn or Trajectory at ``t`` (scalar or array)."""
    if isinstance(f, PiecewiseFn):
        return f(t)
    if f.exact is not None:
        return f.exact(t)
    scalar = np.ndim(t) == 0
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    tol = 1e-12 * max(1.0, abs(f.grid[0]), abs(f.grid[-1]))
    if np.any(tt < f.grid[0] - tol) or np.any(tt > f.grid[-1] + tol):
        raise DomainError(f"t outside trajectory span [{f.grid[0]}, {f.grid[-1]}]")
    out = np.interp(tt, f.grid, f.values)
    return float(out[0]) if scalar else out


def to_csv(f, grid: Optional[np.ndarray] = None) -> str:
    """Two-column ``t,value`` CSV text."""
    if grid is None:
        grid = f.grid if isinstance(f, Trajectory) else f.breakpoints
    values = eval_fn(f, np.asarray(grid, dtype=float))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "value"])
    for t, v in zip(grid, values):
        w.writerow([repr(float(t)), repr(float(v))])
    return buf.getvalue()


def from_csv(text: str) -> Trajectory:
    rows = list(csv.reader(io.StringIO(text)))
    data = np.array([[float(a), float(b)] for a, b in rows[1:]])
    return Trajectory(data[:, 0], data[:, 1])


# -- roots ------------------------------------------------------------------

@dataclass
class RootSet:
    """Point roots plus intervals on which the function vanishes identically."""

    points: np.ndarray
    zero_intervals: list = field(default_factory=list)
    degenerate: bool = False

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points.tolist())

    def __getitem__(self, i):
        return self.points[i]


def bisect_root(fn, a: float, b: float, fa: Optional[float] = None) -> float:
    """Bisection on a sign-changing bracket down to floating-point resolution."""
    fa = fn(a) if fa is None else fa
    if fa == 0.0:
        return a
    for _ in range(200):
        m = 0.5 * (a + b)
        if m <= a or m >= b:
            break
        fm = fn(m)
        if fm == 0.0:
            return m
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def _golden_min(fn, a: float, b: float, iters: int = 80):
    g = (math.sqrt(5) - 1) / 2
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = fn(d)
        if b - a <= 1e-15 * max(1.0, abs(a)):
            break
    return (c, fc) if fc < fd else (d, fd)


def _dedupe(points: list, tol: float) -> list:
    points = sorted(points)
    out = []
    for p in points:
        if not out or p - out[-1] > tol:
            out.append(p)
    return out


def find_roots(x, a: float, b: float, rel_tol: float = 1e-12) -> RootSet:
    """All zeros of ``x`` on ``[a, b]``.

    Sign changes are bisected on the exact segment (or located on the linear
    interpolant); samples with ``|x| <= rel_tol * sup|x|`` that do not change
    sign are reported once as tangential zeros; stretches where ``x`` vanishes
    identically come back as ``zero_intervals``.
    """
    if b < a:
        raise ValueError("need a <= b")
    if isinstance(x, PiecewiseFn):
        x = Trajectory(exact=x)
    lo, hi = x.span
    tol_t = 1e-12 * max(1.0, abs(lo) if math.isfinite(lo) else 1.0, abs(hi) if math.isfinite(hi) else 1.0)
    if a < lo - tol_t or b > hi + tol_t:
        raise DomainError(f"[{a}, {b}] outside trajectory span [{lo}, {hi}]")
    if x.exact is not None:
        return _roots_exact(x.exact, a, b, rel_tol)
    return _roots_grid(x.grid, x.values, a, b, rel_tol)


def _local_scales(maxima: np.ndarray) -> np.ndarray:
    """Max of each entry and its two neighbours: the scale a zero is judged against.

    A global scale would declare the far tail of a decaying solution to be zero.
    """
    m = np.asarray(maxima, dtype=float)
    out = m.copy()
    out[1:] = np.maximum(out[1:], m[:-1])
    out[:-1] = np.maximum(out[:-1], m[1:])
    return out


def _roots_exact(f: PiecewiseFn, a: float, b: float, rel_tol: float) -> RootSet:
    pieces = []
    for seg in f.segments_between(a, b):
        lo, hi = max(seg.left, a), min(seg.right, b)
        if hi < lo:
            continue
        n = 17 + 4 * seg.degree + 8 * len(seg.terms)
        u = np.linspace(lo, hi, n) if hi > lo else np.array([lo])
        v = seg(u)
        pieces.append((seg, u, v))
    t_tol = 1e-12 * max(1.0, abs(a), abs(b))
    if not pieces or all(np.max(np.abs(v)) == 0.0 for _, _, v in pieces):
        return RootSet(np.zeros(0), [(a, b)], degenerate=True)
    tols = rel_tol * _local_scales(np.array([np.max(np.abs(v)) for _, _, v in pieces]))
    roots: list = []
    intervals: list = []
    for (seg, u, v), tol in zip(pieces, tols):
        if len(u) > 1 and np.max(np.abs(v)) <= tol:
            if intervals and abs(intervals[-1][1] - u[0]) <= t_tol:
                intervals[-1] = (intervals[-1][0], u[-1])
            else:
                intervals.append((u[0], u[-1]))
            continue
        small = np.abs(v) <= tol
        for i in range(len(u)):
            if small[i]:
                roots.append(u[i])
        for i in range(len(u) - 1):
            if small[i] or small[i + 1]:
                continue
            if (v[i] > 0) != (v[i + 1] > 0):
                roots.append(bisect_root(lambda t: float(seg(t)), u[i], u[i + 1], v[i]))
        # interior near-touches missed by the sampling
        av = np.abs(v)
        for i in range(1, len(u) - 1):
            if small[i] or small[i - 1] or small[i + 1]:
                continue
            if av[i] <= av[i - 1] and av[i] <= av[i + 1] and (v[i - 1] > 0) == (v[i + 1] > 0) == (v[i] > 0):
                tm, fm = _golden_min(lambda t: abs(float(seg(t))), u[i - 1], u[i + 1])
                if fm <= tol:
                    roots.append(tm)
    # drop point roots inside zero intervals
    roots = [r for r in roots if not any(lo - t_tol <= r <= hi + t_tol for lo, hi in intervals)]
    roots = _collapse_runs(roots, pieces, tols, t_tol)
    degenerate = bool(intervals) and intervals[0][0] <= a + t_tol and intervals[-1][1] >= b - t_tol \
        and len(intervals) == 1
    return RootSet(np.array(roots), intervals, degenerate)


def _collapse_runs(roots, pieces, tols, t_tol):
    """Merge duplicate reports of one zero (e.g. a touch found on both sides of a breakpoint)."""
    roots = _dedupe(roots, t_tol)
    if len(roots) < 2:
        return roots
    out = [roots[0]]
    for r in roots[1:]:
        prev = out[-1]
        # same zero if x stays below tolerance between the two reports
        if r - prev < 1e-6:
            mid = 0.5 * (r + prev)
            for (seg, u, _), tol in zip(pieces, tols):
                if u[0] <= mid <= u[-1]:
                    if abs(float(seg(mid))) <= tol:
                        break
            else:
                out.append(r)
            continue
        out.append(r)
    return out


_GRID_BLOCK = 64


def _roots_grid(grid, values, a, b, rel_tol) -> RootSet:
    mask = (grid >= a) & (grid <= b)
    g = np.concatenate([[a], grid[mask], [b]])
    v = np.interp(g, grid, values)
    g, keep = np.unique(g, return_index=True)
    v = v[keep]
    av = np.abs(v)
    if float(np.max(av)) == 0.0:
        return RootSet(np.zeros(0), [(a, b)], degenerate=True)
    # local scale: max over blocks of _GRID_BLOCK samples and their neighbours
    nb = -(-len(av) // _GRID_BLOCK)
    padded = np.zeros(nb * _GRID_BLOCK)
    padded[:len(av)] = av
    block = _local_scales(padded.reshape(nb, _GRID_BLOCK).max(axis=1))
    tol = rel_tol * np.repeat(block, _GRID_BLOCK)[:len(av)]
    small = av <= tol
    roots, intervals = [], []
    i = 0
    n = len(g)
    while i < n:
        if small[i]:
            j = i
            while j + 1 < n and small[j + 1]:
                j += 1
            if j > i:
                intervals.append((g[i], g[j]))
            else:
                roots.append(g[i])
            i = j + 1
            continue
        if i + 1 < n and not small[i + 1] and (v[i] > 0) != (v[i + 1] > 0):
            # the interpolant is linear on the cell; its root is exact
            roots.append(g[i] - v[i] * (g[i + 1] - g[i]) / (v[i + 1] - v[i]))
        i += 1
    degenerate = len(intervals) == 1 and intervals[0] == (g[0], g[-1])
    return RootSet(np.array(roots), intervals, degenerate)
