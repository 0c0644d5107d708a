"""Explicit solutions whose amplitude converges while the phase drifts without bound.

``slow_phase``  negative feedback, tau_m = 3/2: block k is varpi^- scaled by
                x(t_k) and cut 1/(k+1) before its extremum, t_k = 5k/2 - H_k.
``tau2``        tau_m = 2: varpi_2 semicycles separated by zero plateaus of
                length 1/(n+N), with the top of each ascent slightly rounded.

Both report the amplitude sequence against its partial-product oracle, the
cumulative phase drift against harmonic partial sums, and a witness: the
smallest distance, over all shifts, between the late solution and the scaled
periodic profile.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..dde import DdeSpec, DelayFn, integrate
from ..periodic import build_minus, build_varpi
from ..piecewise import DomainError, PiecewiseFn, Segment, Trajectory, eval_fn, find_roots
from .common import fit_shift, probe_grid

KINDS = ("slow_phase", "tau2")
WITNESS_FLOOR = 0.05


@dataclass
class CounterexampleReport:
    kind: str
    param: int
    amplitudes: np.ndarray
    amplitude_oracle: np.ndarray
    phase_drift: np.ndarray
    harmonic: np.ndarray
    witness: float
    M: float
    witness_window: tuple
    extras: dict = field(default_factory=dict)

    @property
    def final_amplitude(self) -> float:
        return float(self.amplitudes[-1])

    @property
    def amplitude_error(self) -> float:
        return float(np.max(np.abs(self.amplitudes - self.amplitude_oracle)))

    @property
    def drift_error(self) -> float:
        return float(np.max(np.abs(self.phase_drift - self.harmonic)))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "param": self.param,
                "final_amplitude": self.final_amplitude,
                "amplitude_error": self.amplitude_error, "drift_error": self.drift_error,
                "witness": self.witness, "M": self.M, "witness_window": list(self.witness_window),
                "amplitudes": self.amplitudes.tolist(), "amplitude_oracle": self.amplitude_oracle.tolist(),
                "phase_drift": self.phase_drift.tolist(), "harmonic": self.harmonic.tolist(),
                **self.extras}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _witness(x, ref, period: float, a: float, b: float, per_unit: int) -> tuple[float, float]:
    t = probe_grid(x, a, b, per_unit)
    v = eval_fn(x, t)
    M = float(np.max(np.abs(v[t >= b - 0.2 * (b - a)])))
    _, dist = fit_shift(v, t, ref, M, period)
    return dist, M


# -- slow phase (negative feedback) ---------------------------------------------------

def slow_phase_times(m: int) -> np.ndarray:
    """t_k = 5k/2 - H_k for k = 1..m."""
    k = np.arange(1, m + 1)
    return 2.5 * k - np.cumsum(1.0 / k)


def slow_phase_spec(m: int) -> DdeSpec:
    if m < 2:
        raise DomainError("slow_phase needs at least 2 blocks")
    tk = slow_phase_times(m)
    p = PiecewiseFn([Segment.constant(tk[0], tk[-1], -1.0)])
    pieces = []
    for a, b in zip(tk, tk[1:]):
        pieces.append((a, a + 1.5, a, 0.0))
        pieces.append((a + 1.5, b, a, 1.0))
    return DdeSpec(p, DelayFn.from_pieces(pieces), tk[0], build_minus().fn, name=f"slow_phase m={m}")


def slow_phase(m: int, per_unit: int = 20):
    spec = slow_phase_spec(m)
    tk = slow_phase_times(m)
    x = integrate(spec, tk[-1])
    k = np.arange(1, m + 1)
    amps = np.abs(eval_fn(x, tk))
    oracle = np.cumprod(1.0 - 0.5 / k.astype(float) ** 2)
    zeros = find_roots(x, tk[0], tk[-1]).points
    # zero of block k sits at t_k + 1; varpi^- has its zeros at 1 + 5k/2
    kz = np.arange(1, len(zeros) + 1)
    drift = (1.0 + 2.5 * kz) - zeros
    harmonic = np.cumsum(1.0 / kz)
    half = tk[(m - 1) // 2]
    minus = build_minus()
    wit, M = _witness(x, minus.fn, minus.full_period, half, tk[-1], per_unit)
    h = max(1, m // 2)
    extras = {"richardson_limit": 2.0 * amps[-1] - amps[h - 1] if m >= 2 else float(amps[-1]),
              "infinite_product": math.sin(math.pi / math.sqrt(2)) / (math.pi / math.sqrt(2))}
    rep = CounterexampleReport("slow_phase", m, amps, oracle, drift, harmonic, wit, M, (half, tk[-1]), extras)
    return x, spec, rep


# -- tau_m = 2 with zero plateaus ------------------------------------------------------

def tau2_times(N: int, blocks: int) -> np.ndarray:
    """t_0 = -2, t_{n+1} = t_n + 2 + 1/(n + N), for n = 0..blocks."""
    n = np.arange(blocks)
    return np.concatenate([[-2.0], -2.0 + np.cumsum(2.0 + 1.0 / (n + N))])


def tau2_spec(N: int, blocks: int) -> DdeSpec:
    if N < 4:
        raise DomainError("tau2 needs N >= 4")
    if blocks < 2:
        raise DomainError("tau2 needs at least 2 blocks")
    t = tau2_times(N, blocks)
    p_parts, d_parts = [], []
    for n in range(blocks):
        h = 1.0 / (n + N)
        tn, tn1 = t[n], t[n + 1]
        p_parts += [(tn + 2.0, tn1, 0.0), (tn1, tn1 + 1.0, 1.0), (tn1 + 1.0, tn1 + 2.0, -1.0)]
        d_parts += [(tn + 2.0, tn1, tn + 2.0, 0.0),
                    (tn1, tn1 + 1.0 - h, tn + 1.0, 0.0),
                    (tn1 + 1.0 - h, tn1 + 1.0, tn1 - 1.0 - h, 1.0),
                    (tn1 + 1.0, tn1 + 2.0, tn1 + 1.0, 0.0)]
    p = PiecewiseFn([Segment.constant(a, b, v) for a, b, v in p_parts])
    return DdeSpec(p, DelayFn.from_pieces(d_parts), 0.0, build_varpi(2.0).fn,
                   name=f"tau2 N={N} blocks={blocks}")


def tau2(N: int, blocks: int = 2000, per_unit: int = 20):
    spec = tau2_spec(N, blocks)
    t = tau2_times(N, blocks)
    end = t[-1] + 2.0
    x = integrate(spec, end)
    n = np.arange(blocks)
    amps = eval_fn(x, t[1:] + 1.0)
    oracle = np.cumprod(1.0 - 0.5 / (n + N).astype(float) ** 2)
    # each plateau ends where the next ascent starts: that is t_{n+1}
    rs = find_roots(x, 0.0, end)
    starts = np.array([hi for lo, hi in rs.zero_intervals if hi < end - 1e-9])
    k = np.arange(1, len(starts) + 1)
    drift = starts - (-2.0 + 2.0 * k)
    harmonic = np.cumsum(1.0 / (np.arange(len(starts)) + N))
    ref = build_varpi(2.0)
    half = t[blocks // 2]
    wit, M = _witness(x, ref.fn, ref.period, half, end, per_unit)
    rep = CounterexampleReport("tau2", N, amps, oracle, drift, harmonic, wit, M, (half, end),
                               {"blocks": blocks})
    return x, spec, rep


def counterexample(kind: str, param: int, blocks: int = 2000):
    """``(x, spec, report)`` for ``slow_phase`` (param = blocks m) or ``tau2`` (param = N)."""
    if kind == "slow_phase":
        return slow_phase(int(param))
    if kind == "tau2":
        return tau2(int(param), blocks)
    raise DomainError(f"unknown counterexample {kind!r}; expected one of {KINDS}")
