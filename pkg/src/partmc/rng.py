"""Seed derivation.

Every random stream in the package is addressed by a root seed plus an
integer key path.  The stream for ``(seed, k1, k2, ...)`` is a Philox
(counter-based) generator keyed by ``SeedSequence(seed, spawn_key=(k1, k2, ...))``,
so the numbers a chain sees depend only on its address, never on which worker
runs it or in which order.
"""

import numpy as np

# top-level key namespaces
CHAIN = 0
SWAP = 1
SUBSAMPLE = 2
KMEANS = 3
BRIDGE = 4
INITS = 5
EXPLORE = 6
PARTITION = 7
ROUND_CHAINS = 8
NAIVE = 9
PT_BASELINE = 10
REPLICATION = 11
ANALYSIS = 12

_MASK64 = (1 << 64) - 1


def _sequence(seed, key):
    seed = int(seed)
    if seed < 0:
        raise ValueError(f"seed must be a non-negative integer, got {seed}")
    return np.random.SeedSequence(seed & _MASK64, spawn_key=tuple(int(k) for k in key))


def stream(seed, *key):
    """Independent generator for the stream addressed by ``(seed, *key)``."""
    return np.random.Generator(np.random.Philox(_sequence(seed, key)))


def derive_seed(seed, *key):
    """A 64-bit child seed for ``(seed, *key)``."""
    lo, hi = _sequence(seed, key).generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)
