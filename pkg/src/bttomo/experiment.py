"""End-to-end tomography experiments and their on-disk report bundle.

An experiment runs ``n`` seeded broadcasts on one topology, folds the
single-run weights in iteration order, clusters every prefix aggregate and
scores it against the ground truth. Broadcasts are independent, so they may
run in a process pool; the fold is always sequential, which keeps the result
identical for any worker count.
"""

from __future__ import annotations

import json
import os
import time
from collections.abc import Callable, Mapping
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

from .cluster import modularity
from .eval import ConvergenceTrace, convergence_trace, nmi
from .export import to_dot
from .metric import MeasurementGraph, single_run_weights
from .partition import Partition
from .scenarios import scenario_document
from .swarm import SwarmConfig, TransferLedger, run_broadcast
from .swarm.rng import derive_seed
from .topology import parse_topology


class RootPolicy(str, Enum):
    FIXED = "fixed"
    ROTATE = "rotate"


def rotate_root(policy: RootPolicy | str, iteration: int, n: int) -> int:
    """Root node of broadcast ``iteration``: always 0, or ``iteration mod n``."""
    if RootPolicy(policy) is RootPolicy.ROTATE:
        return iteration % n
    return 0


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce an experiment bit for bit.

    Exactly one of ``scenario`` and ``topology_path`` is set. ``None`` swarm
    overrides keep the :class:`SwarmConfig` defaults. ``workers`` only
    affects wall-clock time.
    """

    scenario: str | None = None
    topology_path: str | None = None
    iterations: int = 36
    seed: int = 0
    root_policy: RootPolicy = RootPolicy.FIXED
    fragments: int | None = None
    slots: int | None = None
    peer_cap: int | None = None
    cluster_seed: int = 0
    edge_fraction: float = 0.5
    out_dir: str | None = None
    keep_ledgers: bool = False
    workers: int = 1

    def __post_init__(self) -> None:
        if (self.scenario is None) == (self.topology_path is None):
            raise ValueError("give exactly one of scenario and topology_path")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        object.__setattr__(self, "root_policy", RootPolicy(self.root_policy))

    def topology_document(self) -> dict[str, Any] | str:
        """The builtin scenario document, or the topology file's JSON text."""
        if self.scenario is not None:
            return scenario_document(self.scenario)
        return Path(self.topology_path).read_text()

    def swarm_config(self, iteration: int, n: int) -> SwarmConfig:
        overrides: dict[str, int] = {}
        if self.fragments is not None:
            overrides["file_size_fragments"] = self.fragments
        if self.slots is not None:
            overrides["max_parallel_uploads"] = self.slots
        if self.peer_cap is not None:
            overrides["max_peer_set"] = self.peer_cap
        return SwarmConfig(
            root=rotate_root(self.root_policy, iteration, n),
            rng_seed=derive_seed(self.seed, iteration),
            **overrides,
        )

    def to_json(self) -> dict[str, Any]:
        d = asdict(self)
        d["root_policy"] = self.root_policy.value
        return d


@dataclass(frozen=True)
class RunRecord:
    iteration: int
    seed: int
    root: int
    digest: str
    seconds: float
    stats: Mapping[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class ExperimentReport:
    config: ExperimentConfig
    runs: tuple[RunRecord, ...]
    trace: ConvergenceTrace
    truth: Partition
    nmi: float
    q: float
    seconds: float  # wall clock for the whole experiment
    ledgers: tuple[TransferLedger, ...] = ()

    @property
    def partition(self) -> Partition:
        return self.trace.final.partition

    @property
    def weights(self) -> MeasurementGraph:
        return self.trace.graph

    def to_json(self) -> dict[str, Any]:
        return {
            "config": self.config.to_json(),
            "runs": [asdict(r) for r in self.runs],
            "trace": [asdict(p) for p in self.trace.points],
            "partition": list(self.partition.labels),
            "nmi": self.nmi,
            "modularity": self.q,
            "truth_modularity": float(modularity(self.weights, self.truth).q),
            "seconds": self.seconds,
        }

    def write_bundle(self, out_dir: str | Path, names: list[str] | None = None) -> Path:
        """Write trace, partition, weights, DOT and report files into ``out_dir``.

        Everything except ``report.json`` (which records timings) is a pure
        function of the config.
        """
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        self.trace.write(out / "trace.csv")
        self.partition.write(out / "partition.csv")
        self.truth.write(out / "truth.csv")
        self.weights.write(out / "weights.csv")
        (out / "graph.dot").write_text(to_dot(self.weights, self.truth, self.config.edge_fraction, names))
        if self.ledgers:
            ldir = out / "ledgers"
            ldir.mkdir(exist_ok=True)
            for rec, ledger in zip(self.runs, self.ledgers):
                ledger.write(ldir / f"run-{rec.iteration:04d}.csv")
        (out / "report.json").write_text(json.dumps(self.to_json(), indent=2) + "\n")
        return out


def _broadcast(document: dict[str, Any] | str, cfg: SwarmConfig) -> tuple[TransferLedger, float]:
    topology, _ = parse_topology(document)
    t0 = time.perf_counter()
    ledger = run_broadcast(topology, cfg)
    return ledger, time.perf_counter() - t0


def run_experiment(
    config: ExperimentConfig,
    progress: Callable[[RunRecord], None] | None = None,
) -> ExperimentReport:
    """Run all broadcasts, build the convergence trace and write the bundle."""
    t0 = time.perf_counter()
    document = config.topology_document()
    topology, truth = parse_topology(document)
    configs = [config.swarm_config(i, topology.n) for i in range(config.iterations)]

    if config.workers > 1 and config.iterations > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = pool.map(_broadcast, [document] * len(configs), configs)
            outcomes = _collect(results, configs, progress)
    else:
        outcomes = _collect((_broadcast(document, c) for c in configs), configs, progress)

    ledgers = [ledger for ledger, _ in outcomes]
    records = tuple(rec for _, rec in outcomes)
    trace = convergence_trace((single_run_weights(x) for x in ledgers), truth, config.cluster_seed)
    final = trace.final
    report = ExperimentReport(
        config=config,
        runs=records,
        trace=trace,
        truth=truth,
        nmi=nmi(final.partition, truth),
        q=float(final.score.q),
        seconds=time.perf_counter() - t0,
        ledgers=tuple(ledgers) if config.keep_ledgers else (),
    )
    if config.out_dir is not None:
        report.write_bundle(config.out_dir, list(topology.nodes))
    return report


def _collect(results, configs, progress):
    out = []
    for i, ((ledger, secs), cfg) in enumerate(zip(results, configs)):
        rec = RunRecord(i, cfg.rng_seed, cfg.root, ledger.digest(), secs, dict(ledger.stats))
        if progress is not None:
            progress(rec)
        out.append((ledger, rec))
    return out


def default_workers() -> int:
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)


__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "RootPolicy",
    "RunRecord",
    "default_workers",
    "rotate_root",
    "run_experiment",
]
