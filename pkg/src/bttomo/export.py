"""Graphviz DOT output for force-directed layout (``neato``).

Only the heaviest edges are kept, and edge length is inversely proportional
to weight so that nodes exchanging many fragments are drawn close together.
"""

from __future__ import annotations

import math
import statistics
from collections.abc import Sequence

from .metric import MeasurementGraph
from .partition import Partition

SHAPES = ("circle", "diamond", "triangle", "square", "pentagon", "hexagon", "invtriangle", "octagon", "septagon")


def top_edges(graph: MeasurementGraph, edge_fraction: float) -> list[tuple[int, int, float]]:
    """The ``ceil(edge_fraction * |E|)`` heaviest nonzero edges, ties by node pair."""
    if not 0.0 < edge_fraction <= 1.0:
        raise ValueError(f"edge_fraction must lie in (0, 1], got {edge_fraction}")
    edges = sorted(graph.edges(), key=lambda e: (-graph.exact_weight(e[0], e[1]), e[0], e[1]))
    return edges[: math.ceil(edge_fraction * len(edges))]


def _num(x: float) -> str:
    return format(x, ".12g")


def to_dot(
    graph: MeasurementGraph,
    truth: Partition,
    edge_fraction: float = 0.5,
    names: Sequence[str] | None = None,
) -> str:
    """Undirected DOT document; node shape encodes the ground-truth cluster.

    Each edge carries ``weight`` = w(e) and ``len`` = c / w(e), with ``c``
    chosen so that the median emitted length is 1.
    """
    if graph.n_edges == 0:
        raise ValueError("graph has no edges to draw")
    if len(truth) != graph.n:
        raise ValueError(f"ground truth covers {len(truth)} nodes, graph has {graph.n}")
    if names is not None and len(names) != graph.n:
        raise ValueError("need one name per node")
    edges = top_edges(graph, edge_fraction)
    scale = 1.0 / statistics.median(1.0 / w for _, _, w in edges)
    lines = ["graph tomography {", "  layout=neato;", "  overlap=false;", "  node [fontsize=10];"]
    for v in range(graph.n):
        label = names[v] if names is not None else str(v)
        c = truth.labels[v]
        shape = SHAPES[c % len(SHAPES)]
        lines.append(f'  {v} [label="{label}", shape={shape}, comment="cluster {c}"];')
    for a, b, w in edges:
        lines.append(f"  {a} -- {b} [weight={_num(w)}, len={_num(scale / w)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
