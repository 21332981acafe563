from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class SwarmConfig:
    file_size_fragments: int = 15259
    fragment_size: int = 16384  # bytes
    max_parallel_uploads: int = 4
    max_peer_set: int = 35
    root: int = 0
    rng_seed: int = 0
    unchoke_period: float = 10.0  # simulated seconds
    optimistic_slots: int = 1

    def __post_init__(self) -> None:
        if self.file_size_fragments < 1:
            raise ValueError("file_size_fragments must be >= 1")
        if self.fragment_size < 1:
            raise ValueError("fragment_size must be >= 1")
        if not 1 <= self.max_parallel_uploads < self.max_peer_set:
            raise ValueError("need 1 <= max_parallel_uploads < max_peer_set")
        if not 0 <= self.optimistic_slots <= self.max_parallel_uploads:
            raise ValueError("optimistic_slots must lie in [0, max_parallel_uploads]")
        if self.unchoke_period <= 0:
            raise ValueError("unchoke_period must be positive")
        if self.root < 0:
            raise ValueError("root must be a node index")

    @property
    def fragment_bits(self) -> float:
        return float(self.fragment_size * 8)


@dataclass(frozen=True, eq=False)
class TransferLedger:
    """Fragments received per directed ``(sender, receiver)`` pair in one broadcast."""

    counts: np.ndarray  # (N, N) int64, counts[sender, receiver]
    completion_times: np.ndarray  # (N,) simulated seconds; 0.0 for the root
    file_size_fragments: int
    root: int
    stats: dict[str, int] = field(default_factory=dict, compare=False)

    @property
    def n(self) -> int:
        return self.counts.shape[0]

    def items(self):
        """Nonzero ``((sender, receiver), fragments)`` in sorted order."""
        for s, r in zip(*np.nonzero(self.counts)):
            yield (int(s), int(r)), int(self.counts[s, r])

    def received(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TransferLedger):
            return NotImplemented
        return (
            self.root == other.root
            and self.file_size_fragments == other.file_size_fragments
            and np.array_equal(self.counts, other.counts)
            and np.array_equal(self.completion_times, other.completion_times)
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["sender", "receiver", "fragments"])
        for (s, r), c in self.items():
            w.writerow([s, r, c])
        return buf.getvalue()

    def completion_csv(self) -> str:
        lines = ["node,completion_seconds"]
        lines += [f"{i},{float(t)!r}" for i, t in enumerate(self.completion_times)]
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        h = hashlib.sha256(self.to_csv().encode())
        h.update(self.completion_csv().encode())
        return h.hexdigest()

    def write(self, path: str | Path) -> None:
        path = Path(path)
        path.write_text(self.to_csv())
        path.with_suffix(".completion.csv").write_text(self.completion_csv())

    @classmethod
    def from_csv(cls, text: str, n: int, file_size_fragments: int, root: int = 0,
                 completion_text: str | None = None) -> TransferLedger:
        counts = np.zeros((n, n), dtype=np.int64)
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames != ["sender", "receiver", "fragments"]:
            raise ValueError("ledger CSV needs header 'sender,receiver,fragments'")
        for row in reader:
            counts[int(row["sender"]), int(row["receiver"])] = int(row["fragments"])
        times = np.zeros(n)
        if completion_text is not None:
            for row in csv.DictReader(io.StringIO(completion_text)):
                times[int(row["node"])] = float(row["completion_seconds"])
        return cls(counts, times, file_size_fragments, root)
