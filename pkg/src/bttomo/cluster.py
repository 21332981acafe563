"""Weighted modularity and the Louvain method.

Modularity of a partition is ``Q = sum_i (e_ii - a_i**2)`` where ``e_ii`` is
the fraction of edge weight inside cluster ``i`` and ``a_i`` the fraction of
edge ends attached to it. Louvain alternates greedy single-node moves with
coarsening; the flat partition of the best level is returned.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .metric import MeasurementGraph
from .partition import Partition


class EmptyGraphError(ValueError):
    """Modularity is undefined for a graph without edge weight."""


@dataclass(frozen=True)
class ModularityScore:
    q: float | Fraction
    e_ii: tuple[float | Fraction, ...]
    a_i: tuple[float | Fraction, ...]


def modularity(graph: MeasurementGraph, partition: Partition, exact: bool = False) -> ModularityScore:
    """Weighted modularity of ``partition`` on ``graph``.

    With ``exact=True`` every term is a :class:`~fractions.Fraction`.
    """
    if len(partition) != graph.n:
        raise ValueError(f"partition covers {len(partition)} nodes, graph has {graph.n}")
    if graph.n_edges == 0:
        raise EmptyGraphError("graph has no edge weight")
    k = partition.k
    lab = partition.labels
    if exact:
        intra = [Fraction(0)] * k
        ends = [Fraction(0)] * k
        total = graph.total_weight()
        weights = ((a, b, graph.exact_weight(a, b)) for a, b, _ in graph.edges())
    else:
        intra = [0.0] * k
        ends = [0.0] * k
        total = float(graph.total_weight())
        weights = graph.edges()
    for a, b, w in weights:
        ends[lab[a]] += w
        ends[lab[b]] += w
        if lab[a] == lab[b]:
            intra[lab[a]] += w
    e_ii = tuple(x / total for x in intra)
    a_i = tuple(x / (2 * total) for x in ends)
    q = sum(e - a * a for e, a in zip(e_ii, a_i))
    return ModularityScore(q, e_ii, a_i)


@dataclass(frozen=True)
class LouvainResult:
    partition: Partition
    score: ModularityScore
    levels: int  # local-moving levels performed


def _move_nodes(adj: list[dict[int, float]], loops: np.ndarray, two_w: float, rng: np.random.Generator,
                tol: float, start: np.ndarray | None = None) -> np.ndarray:
    """Local moving phase on one level; returns the community of each vertex.

    Starts from singletons, or from the communities ``start`` (labels < n).
    """
    n = len(adj)
    deg = np.array([sum(nb.values()) for nb in adj]) + 2.0 * loops
    comm = np.arange(n) if start is None else np.array(start)
    tot = np.bincount(comm, weights=deg, minlength=n)
    while True:
        gained = 0.0
        for i in rng.permutation(n):
            i = int(i)
            ki = deg[i]
            own = comm[i]
            links: dict[int, float] = {}
            for j, w in adj[i].items():
                c = int(comm[j])
                links[c] = links.get(c, 0.0) + w
            tot[own] -= ki
            stay = links.get(own, 0.0) - tot[own] * ki / two_w
            best_c, best = own, stay
            for c in sorted(links):
                gain = links[c] - tot[c] * ki / two_w
                if gain > best or (gain == best and c < best_c):
                    best_c, best = c, gain
            tot[best_c] += ki
            if best_c != own:
                comm[i] = best_c
                gained += best - stay
        if gained < tol:
            return comm


def _coarsen(adj: list[dict[int, float]], loops: np.ndarray, dense: np.ndarray,
             m: int) -> tuple[list[dict[int, float]], np.ndarray]:
    """Graph of communities; intra-community weight becomes a self-loop."""
    new_adj: list[dict[int, float]] = [{} for _ in range(m)]
    new_loops = np.zeros(m)
    for v, c in enumerate(dense):
        new_loops[c] += loops[v]
    for i, nb in enumerate(adj):
        ci = dense[i]
        for j, w in nb.items():
            cj = dense[j]
            if ci == cj:
                if i < j:
                    new_loops[ci] += w
            else:
                new_adj[ci][cj] = new_adj[ci].get(cj, 0.0) + w
    return new_adj, new_loops


def _dense(comm: np.ndarray) -> tuple[np.ndarray, int]:
    # renumber communities by first appearance
    remap: dict[int, int] = {}
    dense = np.array([remap.setdefault(int(c), len(remap)) for c in comm])
    return dense, len(remap)


def _one_run(graph: MeasurementGraph, adj0: list[dict[int, float]], two_w: float, tol: float,
             rng: np.random.Generator, refine: bool) -> tuple[tuple[float, Partition], int]:
    adj, loops = adj0, np.zeros(graph.n)
    member = np.arange(graph.n)  # original node -> current vertex
    stack = []  # (adj, loops, vertex -> community) of every level
    best: tuple[float, Partition, int] | None = None
    while True:
        comm = _move_nodes(adj, loops, two_w, rng, tol)
        dense, m = _dense(comm)
        stack.append((adj, loops, dense))
        member = dense[member]
        part = Partition.from_labels(member.tolist())
        q = float(modularity(graph, part).q)
        if best is None or q > best[0]:
            best = (q, part, len(stack))
        if m == len(adj):
            break
        adj, loops = _coarsen(adj, loops, dense, m)
    levels = len(stack)
    if refine:
        # project the best level back down, re-running local moves on every level
        top = best[2] - 1
        comm = stack[top][2]
        for lv in range(top, -1, -1):
            a, l, dense = stack[lv]
            if lv < top:
                comm = comm[dense]
            comm = _move_nodes(a, l, two_w, rng, tol, _dense(comm)[0])
        part = Partition.from_labels(comm.tolist())
        q = float(modularity(graph, part).q)
        if q > best[0]:
            best = (q, part, best[2])
    return best[:2], levels


def louvain(graph: MeasurementGraph, seed: int = 0, restarts: int = 8, refine: bool = True) -> LouvainResult:
    """Louvain modularity optimization, cut at the level of highest modularity.

    Vertices are visited in a fresh seeded random order on every pass. A
    vertex moves to the neighbouring community of largest gain, lowest label
    among equal gains. A level stops when a pass gains less than ``1e-9`` of
    the total weight, and the method stops when a level moves nothing.

    With ``refine`` the best level is projected back down and local moving
    is re-run on every finer level. The method is repeated ``restarts`` times
    from one seeded generator and the highest-modularity result is kept
    (earliest on ties), which shakes off most bad local optima.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    if graph.n_edges == 0:
        raise EmptyGraphError("graph has no edge weight")
    rng = np.random.default_rng(seed)
    total = float(graph.total_weight())
    two_w = 2.0 * total
    tol = 1e-9 * total
    adj: list[dict[int, float]] = [{} for _ in range(graph.n)]
    for a, b, w in graph.edges():
        adj[a][b] = w
        adj[b][a] = w
    best: tuple[float, Partition] | None = None
    levels = 0
    for _ in range(restarts):
        cand, lv = _one_run(graph, adj, two_w, tol, rng, refine)
        if best is None or cand[0] > best[0]:
            best, levels = cand, lv
    partition = best[1]
    return LouvainResult(partition, modularity(graph, partition), levels)
