"""Partition agreement (NMI) and NMI-vs-iterations convergence traces."""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from collections.abc import Iterable
from dataclasses import dataclass
from pathlib import Path

from .cluster import LouvainResult, louvain
from .metric import MeasurementGraph, single_run_weights
from .partition import Partition
from .swarm import TransferLedger


def _entropy(sizes: Iterable[int], n: int) -> float:
    return -math.fsum(c / n * math.log(c / n) for c in sizes if c)


def nmi(found: Partition, truth: Partition) -> float:
    """Normalized mutual information, ``I(X; Y) / max(H(X), H(Y))``.

    Identical partitions (up to relabeling) score exactly 1.0, including the
    degenerate case of two single-cluster partitions.
    """
    if len(found) != len(truth):
        raise ValueError(f"partitions cover {len(found)} and {len(truth)} nodes")
    if found.labels == truth.labels:  # labels are canonical, so this is equality up to relabeling
        return 1.0
    n = len(found)
    joint = Counter(zip(found.labels, truth.labels))
    fa = Counter(found.labels)
    tb = Counter(truth.labels)
    h = max(_entropy(fa.values(), n), _entropy(tb.values(), n))
    if h == 0.0:
        return 0.0
    mi = math.fsum(c / n * math.log(c * n / (fa[x] * tb[y])) for (x, y), c in joint.items())
    return min(max(mi / h, 0.0), 1.0)


@dataclass(frozen=True)
class TracePoint:
    n: int
    nmi: float
    modularity: float
    k: int


@dataclass(frozen=True)
class ConvergenceTrace:
    points: tuple[TracePoint, ...]
    final: LouvainResult
    graph: MeasurementGraph  # aggregate over all runs

    def first_perfect(self, tol: float = 0.0) -> int | None:
        """Smallest n with NMI >= 1 - tol, if any."""
        return next((p.n for p in self.points if p.nmi >= 1.0 - tol), None)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "nmi", "modularity", "k"])
        for p in self.points:
            w.writerow([p.n, repr(p.nmi), repr(p.modularity), p.k])
        return buf.getvalue()

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv())


def read_trace(path: str | Path) -> list[TracePoint]:
    rows = csv.DictReader(io.StringIO(Path(path).read_text()))
    return [TracePoint(int(r["n"]), float(r["nmi"]), float(r["modularity"]), int(r["k"])) for r in rows]


def convergence_trace(
    runs: Iterable[TransferLedger | MeasurementGraph],
    truth: Partition,
    cluster_seed: int = 0,
) -> ConvergenceTrace:
    """Cluster every prefix aggregate of ``runs`` and score it against ``truth``."""
    points: list[TracePoint] = []
    agg: MeasurementGraph | None = None
    result: LouvainResult | None = None
    for run in runs:
        g = single_run_weights(run) if isinstance(run, TransferLedger) else run
        agg = g if agg is None else agg + g
        result = louvain(agg, cluster_seed)
        points.append(
            TracePoint(agg.iterations, nmi(result.partition, truth), float(result.score.q), result.partition.k)
        )
    if agg is None or result is None:
        raise ValueError("convergence trace needs at least one run")
    return ConvergenceTrace(tuple(points), result, agg)
