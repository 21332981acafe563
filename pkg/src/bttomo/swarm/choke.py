"""Upload-slot admission (choking)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .config import SwarmConfig
from .rng import randbelow


@njit(cache=True)
def choose_unchoked(candidates, scores, n_slots, n_optimistic, states, stream):
    """Pick the peers a node unchokes.

    ``candidates`` are the interested peers in ascending id order and
    ``scores`` their reciprocation rates. The best ``n_slots - n_optimistic``
    by score (lower id on ties) are kept, then optimistic slots are filled
    uniformly at random from the rest.
    """
    m = candidates.shape[0]
    order = np.argsort(-scores, kind="mergesort")
    regular = min(n_slots - n_optimistic, m)
    out = np.empty(min(n_slots, m), dtype=np.int64)
    for i in range(regular):
        out[i] = candidates[order[i]]
    rest = np.empty(m - regular, dtype=np.int64)
    for i in range(m - regular):
        rest[i] = candidates[order[regular + i]]
    rest.sort()
    j = regular
    left = rest.shape[0]
    while j < out.shape[0]:
        pick = randbelow(states, stream, left)
        out[j] = rest[pick]
        rest[pick] = rest[left - 1]
        left -= 1
        j += 1
    return out


@dataclass(frozen=True)
class ChokeState:
    """Inputs of one rechoke.

    ``interested[p, s]``: peer ``p`` wants fragments from node ``s``.
    ``download_rate[s, p]``: recent rate at which ``s`` received from ``p``.
    ``seeding[s]``: ``s`` holds the whole file, so it ranks peers by the rate
    it uploads to them instead.
    """

    interested: np.ndarray
    download_rate: np.ndarray
    seeding: np.ndarray


def choke_round(state: ChokeState, config: SwarmConfig, states: np.ndarray) -> list[set[int]]:
    """Unchoked peer set of every node."""
    n = state.interested.shape[0]
    out: list[set[int]] = []
    for s in range(n):
        cand = np.flatnonzero(state.interested[:, s])
        cand = cand[cand != s]
        rates = state.download_rate[cand, s] if state.seeding[s] else state.download_rate[s, cand]
        chosen = choose_unchoked(
            cand.astype(np.int64),
            np.asarray(rates, dtype=np.float64),
            config.max_parallel_uploads,
            config.optimistic_slots,
            states,
            s,
        )
        out.append({int(x) for x in chosen})
    return out
