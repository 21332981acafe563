"""Per-node random streams.

Every node owns one SplitMix64 stream. The stream for node ``i`` of a run with
master seed ``s`` starts from ``SeedSequence(s, spawn_key=(i,))``, so streams
are independent of each other and of the order in which nodes consume them.
All randomness inside a broadcast (peer draws, optimistic unchokes, slot
refills, fragment tie-breaks) comes from the stream of the node making the
decision.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


def node_streams(seed: int, n: int) -> np.ndarray:
    """Initial SplitMix64 states for ``n`` nodes under master ``seed``."""
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    out = np.empty(n, dtype=np.uint64)
    for i in range(n):
        out[i] = np.random.SeedSequence(seed, spawn_key=(i,)).generate_state(1, np.uint64)[0]
    return out


def derive_seed(seed: int, *keys: int) -> int:
    """Stable 64-bit child seed of ``seed`` for the given key path."""
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, np.uint64)[0])


@njit(cache=True)
def next_u64(states, i):
    z = states[i] + _GAMMA
    states[i] = z
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


@njit(cache=True)
def next_float(states, i):
    return float(next_u64(states, i) >> _S11) * _INV53


@njit(cache=True)
def randbelow(states, i, n):
    """Uniform integer in ``[0, n)`` drawn from stream ``i``."""
    k = int(next_float(states, i) * n)
    if k >= n:  # float rounding guard
        k = n - 1
    return k
