from __future__ import annotations

import numpy as np
from numba import njit

from .rng import randbelow


@njit(cache=True)
def draw_peer_sets(n, max_peer_set, states):
    """Each node draws ``min(max_peer_set, n-1)`` distinct peers from its own stream."""
    want = min(max_peer_set, n - 1)
    drawn = np.zeros((n, n), dtype=np.bool_)
    pool = np.empty(n - 1, dtype=np.int64)
    for v in range(n):
        j = 0
        for u in range(n):
            if u != v:
                pool[j] = u
                j += 1
        # partial Fisher-Yates
        for i in range(want):
            pick = i + randbelow(states, v, n - 1 - i)
            tmp = pool[i]
            pool[i] = pool[pick]
            pool[pick] = tmp
            drawn[v, pool[i]] = True
    return drawn


def select_peer_set(node: int, n: int, max_peer_set: int, states: np.ndarray) -> set[int]:
    """Draw one node's initial peer set (before symmetrization).

    Only ``states[node]`` is consumed, so drawing nodes one by one gives the
    same sets as :func:`peer_graph`.
    """
    want = min(max_peer_set, n - 1)
    pool = [u for u in range(n) if u != node]
    for i in range(want):
        pick = i + randbelow(states, node, n - 1 - i)
        pool[i], pool[pick] = pool[pick], pool[i]
    return set(pool[:want])


def peer_graph(n: int, max_peer_set: int, states: np.ndarray) -> np.ndarray:
    """Symmetric boolean peer adjacency: ``a`` and ``b`` connect if either drew the other."""
    drawn = draw_peer_sets(n, max_peer_set, states)
    return drawn | drawn.T
