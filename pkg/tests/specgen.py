"""Random piecewise specs with zero plateaus, shared by the normalizer tests."""

import numpy as np

from delaylab.dde import DdeSpec, DelayFn
from delaylab.piecewise import PiecewiseFn, Segment


def random_history(rng, lo=-4.0, pieces=5):
    knots = np.linspace(lo, 0.0, pieces + 1)
    vals = rng.uniform(-1.0, 1.0, pieces + 1)
    segs = [Segment.affine(a, b, va, (vb - va) / (b - a))
            for a, b, va, vb in zip(knots, knots[1:], vals, vals[1:])]
    return PiecewiseFn(segs)


def random_spec(rng, zero_plateaus=True):
    """Piecewise-constant p (some cells exactly 0), piecewise-affine delay, lag at most 2."""
    n = int(rng.integers(4, 9))
    end = float(rng.uniform(4.0, 7.0))
    knots = np.concatenate([[0.0], np.sort(rng.uniform(0.2, end - 0.2, n - 1)), [end]])
    p_segs, d_pieces = [], []
    zeros = 0
    for i, (a, b) in enumerate(zip(knots, knots[1:])):
        last = i == n - 1
        if zero_plateaus and not last and (rng.random() < 0.3 or (zeros == 0 and i == n - 2)):
            c = 0.0
            zeros += 1
        else:
            c = float(rng.choice([-1.0, 1.0]) * rng.uniform(0.3, 2.0))
        p_segs.append(Segment.constant(a, b, c))
        kind = rng.integers(3)
        if kind == 0:
            d_pieces.append((a, b, a - float(rng.uniform(0.1, 1.5)), 1.0))
        elif kind == 1:
            d_pieces.append((a, b, a - float(rng.uniform(0.0, 1.0)), 0.0))
        else:
            d_pieces.append((a, b, a - float(rng.uniform(0.1, 1.0)), 0.5))
    return DdeSpec(PiecewiseFn(p_segs), DelayFn.from_pieces(d_pieces), 0.0, random_history(rng),
                   normalized=False, name="random")
