"""Zeros, semicycles and the boundedness classification by semicycle length."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..dde import DdeSpec
from ..errors import NotOscillatoryError, SpecError
from ..numerics import check_tau
from ..piecewise import PiecewiseFn, Trajectory, eval_fn, find_roots
from ..threshold import lambda_
from .common import window_max

BOUNDARY_TOL = 1e-9
LABELS = ("tends-to-zero", "bounded", "above-threshold")


@dataclass
class SemicycleReport:
    zeros: np.ndarray
    extrema: list            # (time, value) per semicycle, value signed
    lengths: np.ndarray
    alpha: float
    tau_m: Optional[float] = None
    zero_intervals: list = field(default_factory=list)

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([abs(v) for _, v in self.extrema])

    def to_dict(self) -> dict:
        return {"zeros": self.zeros.tolist(), "extrema": [list(e) for e in self.extrema],
                "lengths": self.lengths.tolist(), "alpha": self.alpha, "tau_m": self.tau_m,
                "zero_intervals": [list(z) for z in self.zero_intervals]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def rows(self):
        """One CSV row per semicycle: start, end, length, extremum time and value."""
        for (a, b), L, (tm, v) in zip(zip(self.zeros, self.zeros[1:]), self.lengths, self.extrema):
            yield [a, b, L, tm, v]


def _zero_list(x, a: float, b: float):
    rs = find_roots(x, a, b)
    pts = list(rs.points)
    for lo, hi in rs.zero_intervals:
        pts += [lo, hi]
    return np.array(sorted(pts)), list(rs.zero_intervals)


def semicycles(x, window, spec: Optional[DdeSpec] = None) -> SemicycleReport:
    """Semicycle decomposition of ``x`` over ``window = (a, b)``.

    Only complete semicycles (between two zeros inside the window) are measured.
    Stretches where x vanishes identically are not semicycles; their end points
    both count as zeros.
    """
    if isinstance(x, PiecewiseFn):
        x = Trajectory(exact=x)
    a, b = float(window[0]), float(window[1])
    zeros, zint = _zero_list(x, a, b)
    if len(zeros) < 3:
        raise NotOscillatoryError(f"only {len(zeros)} zeros on [{a}, {b}]; need at least 3")
    lengths, extrema, kept = [], [], [zeros[0]]
    for z0, z1 in zip(zeros, zeros[1:]):
        if any(lo - 1e-12 <= z0 and z1 <= hi + 1e-12 for lo, hi in zint):
            kept.append(z1)  # inside a zero stretch: not a semicycle
            continue
        tm, _ = window_max(x, z0, z1)
        extrema.append((tm, float(eval_fn(x, tm))))
        lengths.append(z1 - z0)
        kept.append(z1)
    lengths = np.array(lengths)
    if lengths.size == 0:
        raise NotOscillatoryError("no complete semicycle in the window")
    tau_m = spec.tau_m if spec is not None else None
    return SemicycleReport(zeros, extrema, lengths, float(lengths.max()), tau_m, zint)


def classify_alpha(alpha: float, tau_m: float, tol: float = BOUNDARY_TOL) -> str:
    """Label from the semicycle bound alpha against Lambda(tau_m)."""
    lam = lambda_(check_tau(tau_m, upper=2.0))
    if alpha < lam - tol:
        return "tends-to-zero"
    if abs(alpha - lam) <= tol:
        return "bounded"
    return "above-threshold"


def _require_unit_coefficient(spec: DdeSpec, a: float, b: float):
    for seg in spec.p.segments_between(a, b):
        lo, hi = max(seg.left, a), min(seg.right, b)
        if hi <= lo:
            continue
        v = seg(np.linspace(lo, hi, 5 + 2 * seg.degree))
        if np.any(np.abs(np.abs(v) - 1.0) > 1e-12):
            raise SpecError("classification needs |p| = 1; normalize the problem first")


def classify(x, spec: DdeSpec, window=None, skip: int = 0) -> tuple[str, SemicycleReport]:
    """Boundedness class of an oscillatory solution by its semicycle lengths.

    ``skip`` drops that many leading semicycles (transient) before taking alpha.
    """
    if isinstance(x, PiecewiseFn):
        x = Trajectory(exact=x)
    if window is None:
        lo, hi = x.span
        window = (spec.t0, hi)
    tau_m = spec.tau_m
    check_tau(tau_m, upper=2.0)
    _require_unit_coefficient(spec, *window)
    rep = semicycles(x, window, spec)
    alpha = float(rep.lengths[skip:].max()) if skip < len(rep.lengths) else rep.alpha
    return classify_alpha(alpha, tau_m), rep
