"""Seeded random streams.

Every stochastic routine derives its generator from ``(seed, *stream)`` with
numpy's ``SeedSequence`` feeding PCG64, so results depend only on the seed and
the stream key, never on call order.
"""

import numpy as np

# stream keys
GENERATE = 1
SPLIT = 2
VOLUME = 3
KDE_DRAW = 4
BOOTSTRAP = 5
RISK = 6
MOLLIFY = 7
NOISE = 8


def make_rng(seed, *stream):
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.PCG64(ss))
