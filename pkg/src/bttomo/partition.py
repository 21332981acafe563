"""Flat, non-overlapping node partitions (ground truth and clustering output)."""

from __future__ import annotations

import csv
import io
from collections.abc import Hashable, Sequence
from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class Partition:
    """Cluster label per node, labels dense ``0..k-1`` in first-appearance order."""

    labels: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.labels:
            raise ValueError("partition must cover at least one node")
        seen = -1
        for lab in self.labels:
            if lab < 0 or lab > seen + 1:
                raise ValueError(f"labels are not dense first-appearance labels: {self.labels!r}")
            seen = max(seen, lab)

    @classmethod
    def from_labels(cls, labels: Sequence[Hashable]) -> Partition:
        """Build from arbitrary hashable labels, densifying them."""
        remap: dict[Hashable, int] = {}
        return cls(tuple(remap.setdefault(lab, len(remap)) for lab in labels))

    @classmethod
    def from_clusters(cls, clusters: Sequence[Sequence[int]], n: int | None = None) -> Partition:
        n = sum(len(c) for c in clusters) if n is None else n
        raw = [-1] * n
        for ci, members in enumerate(clusters):
            for node in members:
                if raw[node] != -1:
                    raise ValueError(f"node {node} assigned twice")
                raw[node] = ci
        if -1 in raw:
            raise ValueError(f"node {raw.index(-1)} not assigned")
        return cls.from_labels(raw)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def k(self) -> int:
        return max(self.labels) + 1

    def clusters(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.k)]
        for node, lab in enumerate(self.labels):
            out[lab].append(node)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["node", "cluster"])
        w.writerows(enumerate(self.labels))
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> Partition:
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows or set(rows[0]) != {"node", "cluster"}:
            raise ValueError("partition CSV needs header 'node,cluster'")
        pairs = sorted((int(r["node"]), r["cluster"]) for r in rows)
        if [p[0] for p in pairs] != list(range(len(pairs))):
            raise ValueError("partition CSV must list nodes 0..N-1 exactly once")
        return cls.from_labels([p[1] for p in pairs])

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def read(cls, path: str | Path) -> Partition:
        return cls.from_csv(Path(path).read_text())
