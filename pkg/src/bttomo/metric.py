"""Per-edge fragment-count metric.

One run gives ``w({a, b}) = counts(a, b) + counts(b, a)``; ``n`` runs give the
mean of the single-run weights. Sums are kept exact (integers for simulated
runs) and divided only on read, so aggregation order can never change a bit.
"""

from __future__ import annotations

import csv
import io
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from pathlib import Path

import numpy as np

from .swarm import TransferLedger

Pair = tuple[int, int]


@dataclass(frozen=True)
class MeasurementGraph:
    """Undirected weighted graph on nodes ``0..n-1``.

    ``sums`` maps ``(a, b)`` with ``a < b`` to the summed weight over
    ``iterations`` runs; absent pairs weigh zero. ``weight`` divides on read.
    """

    n: int
    sums: Mapping[Pair, int | Fraction]
    iterations: int = 1
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("graph needs at least one node")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        clean: dict[Pair, int | Fraction] = {}
        for (a, b), v in sorted(self.sums.items()):
            if not 0 <= a < b < self.n:
                raise ValueError(f"bad pair ({a}, {b}) for a {self.n}-node graph")
            if not isinstance(v, Rational):
                raise TypeError("edge sums must be exact (int or Fraction)")
            if v < 0:
                raise ValueError(f"negative weight on ({a}, {b})")
            if v:
                clean[(a, b)] = v
        object.__setattr__(self, "sums", clean)

    def weight(self, a: int, b: int) -> float:
        if a > b:
            a, b = b, a
        return float(Fraction(self.sums.get((a, b), 0), self.iterations))

    def exact_weight(self, a: int, b: int) -> Fraction:
        if a > b:
            a, b = b, a
        return Fraction(self.sums.get((a, b), 0), self.iterations)

    def edges(self) -> Iterator[tuple[int, int, float]]:
        """Nonzero edges ``(a, b, w)`` with ``a < b`` in pair order."""
        for (a, b), v in self.sums.items():
            yield a, b, float(Fraction(v, self.iterations))

    @property
    def n_edges(self) -> int:
        return len(self.sums)

    def total_weight(self) -> Fraction:
        return Fraction(sum(self.sums.values()), self.iterations)

    def matrix(self) -> np.ndarray:
        """Dense symmetric float matrix of averaged weights."""
        if "matrix" not in self._cache:
            m = np.zeros((self.n, self.n))
            for a, b, w in self.edges():
                m[a, b] = m[b, a] = w
            m.setflags(write=False)
            self._cache["matrix"] = m
        return self._cache["matrix"]

    def __add__(self, other: MeasurementGraph) -> MeasurementGraph:
        """Fold in more runs: sums add, iteration counts add."""
        if not isinstance(other, MeasurementGraph):
            return NotImplemented
        if other.n != self.n:
            raise ValueError(f"cannot aggregate graphs of {self.n} and {other.n} nodes")
        sums = dict(self.sums)
        for pair, v in other.sums.items():
            sums[pair] = sums.get(pair, 0) + v
        return MeasurementGraph(self.n, sums, self.iterations + other.iterations)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["node_a", "node_b", "weight"])
        for (a, b), v in self.sums.items():
            w.writerow([a, b, _format_weight(Fraction(v, self.iterations))])
        return buf.getvalue()

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def from_csv(cls, text: str, n: int | None = None) -> MeasurementGraph:
        """Read a weights CSV as a one-iteration graph.

        ``n`` defaults to one more than the largest node id mentioned.
        """
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames != ["node_a", "node_b", "weight"]:
            raise ValueError("weights CSV needs header 'node_a,node_b,weight'")
        sums: dict[Pair, Fraction] = {}
        for line, row in enumerate(reader, start=2):
            try:
                a, b = int(row["node_a"]), int(row["node_b"])
                v = Fraction(row["weight"])
            except (TypeError, ValueError) as exc:
                raise ValueError(f"weights CSV line {line}: {exc}") from None
            if a == b:
                raise ValueError(f"weights CSV line {line}: self-edge on node {a}")
            pair = (min(a, b), max(a, b))
            if pair in sums:
                raise ValueError(f"weights CSV line {line}: duplicate pair {pair}")
            sums[pair] = v
        top = max((b for _, b in sums), default=0) + 1
        if n is None:
            n = top
        elif n < top:
            raise ValueError(f"weights mention node {top - 1} but the graph has {n} nodes")
        return cls(n, sums)

    @classmethod
    def read(cls, path: str | Path, n: int | None = None) -> MeasurementGraph:
        return cls.from_csv(Path(path).read_text(), n)


def _format_weight(x: Fraction) -> str:
    # integers stay exact; other means are written as the nearest double
    return str(x.numerator) if x.denominator == 1 else repr(float(x))


def single_run_weights(ledger: TransferLedger) -> MeasurementGraph:
    c = np.asarray(ledger.counts, dtype=np.int64)
    sym = c + c.T
    a, b = np.nonzero(np.triu(sym, 1))
    sums = {(int(i), int(j)): int(sym[i, j]) for i, j in zip(a, b)}
    return MeasurementGraph(c.shape[0], sums, 1)


def aggregate(graphs: Iterable[MeasurementGraph]) -> MeasurementGraph:
    """Mean of single-run graphs, counting absent edges as zero."""
    graphs = list(graphs)
    if not graphs:
        raise ValueError("nothing to aggregate")
    n = graphs[0].n
    sums: dict[Pair, int | Fraction] = {}
    total = 0
    for g in graphs:
        if g.n != n:
            raise ValueError(f"cannot aggregate graphs of {n} and {g.n} nodes")
        total += g.iterations
        for pair, v in g.sums.items():
            sums[pair] = sums.get(pair, 0) + v
    return MeasurementGraph(n, sums, total)
