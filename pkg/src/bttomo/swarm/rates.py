"""Max-min fair bandwidth sharing by progressive filling."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from numba import njit

from ..topology import PhysicalTopology

_REL_EPS = 1e-12


class CapacityViolation(AssertionError):
    pass


@njit(cache=True, inline="always")
def _freeze(f, r, routes, route_len, users, fixed, rate, frozen):
    frozen[f] = True
    rate[f] = r
    for j in range(route_len[f]):
        c = routes[f, j]
        users[c] -= 1
        fixed[c] += r


@njit(cache=True)
def max_min_kernel(routes, route_len, flow_cap, capacity):
    """Progressive filling.

    ``routes[f, :route_len[f]]`` are the resources flow ``f`` crosses. All
    unfrozen flows rise together at a common level; a flow freezes when one
    of its resources saturates or the level reaches its own ``flow_cap``.
    """
    nf = routes.shape[0]
    nr = capacity.shape[0]
    users = np.zeros(nr, dtype=np.int64)
    for f in range(nf):
        for j in range(route_len[f]):
            users[routes[f, j]] += 1
    # resource -> flows incidence lists
    ptr = np.zeros(nr + 1, dtype=np.int64)
    for c in range(nr):
        ptr[c + 1] = ptr[c] + users[c]
    fill = ptr[:-1].copy()
    inc = np.empty(ptr[nr], dtype=np.int64)
    for f in range(nf):
        for j in range(route_len[f]):
            c = routes[f, j]
            inc[fill[c]] = f
            fill[c] += 1
    fixed = np.zeros(nr)  # load of frozen flows
    rate = np.zeros(nf)
    frozen = np.zeros(nf, dtype=np.bool_)
    live = np.empty(nr, dtype=np.int64)  # resources still carrying unfrozen flows
    n_live = 0
    for c in range(nr):
        if users[c] > 0:
            live[n_live] = c
            n_live += 1
    capped = np.empty(nf, dtype=np.int64)  # unfrozen flows with a finite cap
    n_capped = 0
    for f in range(nf):
        if np.isfinite(flow_cap[f]):
            capped[n_capped] = f
            n_capped += 1
    level = 0.0
    active = nf
    while active > 0:
        step = np.inf
        for i in range(n_live):
            c = live[i]
            lv = (capacity[c] - fixed[c]) / users[c]
            if lv < step:
                step = lv
        for i in range(n_capped):
            if flow_cap[capped[i]] < step:
                step = flow_cap[capped[i]]
        if not np.isfinite(step):
            raise ValueError("flow with no finite constraint")
        if step > level:
            level = step
        for i in range(n_live):
            c = live[i]
            if users[c] > 0 and capacity[c] - fixed[c] - users[c] * level <= _REL_EPS * capacity[c]:
                for x in range(ptr[c], ptr[c + 1]):
                    f = inc[x]
                    if not frozen[f]:
                        _freeze(f, level, routes, route_len, users, fixed, rate, frozen)
                        active -= 1
        for i in range(n_capped):
            f = capped[i]
            if not frozen[f] and level >= flow_cap[f] * (1.0 - _REL_EPS):
                _freeze(f, min(level, flow_cap[f]), routes, route_len, users, fixed, rate, frozen)
                active -= 1
        kept = 0
        for i in range(n_live):
            if users[live[i]] > 0:
                live[kept] = live[i]
                kept += 1
        n_live = kept
        kept = 0
        for i in range(n_capped):
            if not frozen[capped[i]]:
                capped[kept] = capped[i]
                kept += 1
        n_capped = kept
    return rate


@njit(cache=True)
def check_capacity(routes, route_len, rate, capacity):
    load = np.zeros(capacity.shape[0])
    for f in range(routes.shape[0]):
        for j in range(route_len[f]):
            load[routes[f, j]] += rate[f]
    for c in range(capacity.shape[0]):
        if load[c] > capacity[c] * (1.0 + 1e-9):
            return c
    return -1


def max_min_rates(
    routes: Sequence[Sequence[int]],
    capacity: Sequence[float],
    flow_cap: Sequence[float] | None = None,
) -> np.ndarray:
    """Max-min fair rates for flows over shared resources.

    >>> max_min_rates([[0], [0]], [1000.0]).tolist()
    [500.0, 500.0]
    """
    nf = len(routes)
    width = max((len(r) for r in routes), default=1) or 1
    table = np.full((nf, width), -1, dtype=np.int32)
    lens = np.zeros(nf, dtype=np.int32)
    for f, r in enumerate(routes):
        table[f, : len(r)] = r
        lens[f] = len(r)
    caps = np.full(nf, np.inf) if flow_cap is None else np.asarray(flow_cap, dtype=float)
    cap_arr = np.asarray(capacity, dtype=float)
    if np.any(cap_arr <= 0):
        raise ValueError("capacities must be positive")
    rate = max_min_kernel(table, lens, caps, cap_arr)
    bad = check_capacity(table, lens, rate, cap_arr)
    if bad >= 0:
        raise CapacityViolation(f"resource {bad} over capacity")
    return rate


@dataclass(frozen=True)
class FlowRates:
    flows: tuple[tuple[int, int], ...]
    rates: np.ndarray  # bits per second, aligned with ``flows``

    def rate(self, sender: int, receiver: int) -> float:
        return float(self.rates[self.flows.index((sender, receiver))])


def recompute_rates(flows: Sequence[tuple[int, int]], topology: PhysicalTopology) -> FlowRates:
    """Max-min fair rates of ``(sender, receiver)`` flows over the topology's links."""
    capacity, route, length, cap = topology.channel_table
    routes = [route[s, r, : length[s, r]].tolist() for s, r in flows]
    caps = [cap[s, r] for s, r in flows]
    return FlowRates(tuple(flows), max_min_rates(routes, capacity, caps))
