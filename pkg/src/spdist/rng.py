"""Deterministic random streams.

Every random draw in the package goes through :func:`make_rng`, which returns a
NumPy ``Generator`` backed by the Philox4x64 counter-based bit generator. The
128-bit Philox key is built from the user seed (low 64 bits) and a stream id
(high 64 bits), so the graph sampler and the instance generator never share a
stream even when they are given the same seed.
"""

import numpy as np

GRAPH_STREAM = 0
PROBLEM_STREAM = 1

_MASK64 = (1 << 64) - 1


def make_rng(seed, stream=0):
    """Return a Philox-backed generator keyed by ``(seed, stream)``."""
    key = (int(seed) & _MASK64) | ((int(stream) & _MASK64) << 64)
    return np.random.Generator(np.random.Philox(key=key))
