"""``tomo`` command line."""

from __future__ import annotations

import argparse
import os
import sys
from collections.abc import Sequence

from . import scenarios
from .cluster import louvain
from .eval import nmi
from .experiment import ExperimentConfig, RunRecord, default_workers, run_experiment
from .export import to_dot
from .metric import MeasurementGraph
from .partition import Partition


def _seed(args: argparse.Namespace) -> int:
    env = os.environ.get("TOMO_SEED")
    if env is None:
        return args.seed
    try:
        return int(env, 0)
    except ValueError:
        raise ValueError(f"TOMO_SEED must be an integer, got {env!r}") from None


def _cmd_run(args: argparse.Namespace) -> int:
    config = ExperimentConfig(
        scenario=args.scenario,
        topology_path=args.topology,
        iterations=args.iterations,
        seed=_seed(args),
        root_policy=args.root_policy,
        fragments=args.fragments,
        slots=args.slots,
        peer_cap=args.peer_cap,
        cluster_seed=args.cluster_seed,
        edge_fraction=args.fraction,
        out_dir=args.out,
        keep_ledgers=args.keep_ledgers,
        workers=args.workers or default_workers(),
    )

    def progress(rec: RunRecord) -> None:
        if not args.quiet:
            print(f"run {rec.iteration + 1}/{config.iterations}: root {rec.root}, {rec.seconds:.2f} s", file=sys.stderr)

    report = run_experiment(config, progress)
    print("n,nmi,modularity,k")
    for p in report.trace.points:
        print(f"{p.n},{p.nmi:.6f},{p.modularity:.6f},{p.k}")
    print(f"final NMI {report.nmi:.6f}, Q {report.q:.6f}, {report.seconds:.1f} s", file=sys.stderr)
    return 0


def _cmd_cluster(args: argparse.Namespace) -> int:
    graph = MeasurementGraph.read(args.weights)
    result = louvain(graph, args.cluster_seed)
    if args.out:
        result.partition.write(args.out)
    else:
        sys.stdout.write(result.partition.to_csv())
    msg = f"k={result.partition.k} Q={float(result.score.q):.6f}"
    if args.truth:
        truth = Partition.read(args.truth)
        msg += f" NMI={nmi(result.partition, truth):.6f}"
    print(msg, file=sys.stderr)
    return 0


def _cmd_nmi(args: argparse.Namespace) -> int:
    print(repr(nmi(Partition.read(args.a), Partition.read(args.b))))
    return 0


def _cmd_export_dot(args: argparse.Namespace) -> int:
    truth = Partition.read(args.truth)
    graph = MeasurementGraph.read(args.weights, n=len(truth))
    dot = to_dot(graph, truth, args.fraction)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(dot)
    else:
        sys.stdout.write(dot)
    return 0


def _cmd_scenarios(args: argparse.Namespace) -> int:
    for name in scenarios.scenario_names():
        print(f"{name}\t{scenarios.DESCRIPTIONS[name]}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tomo", description="Bandwidth tomography from simulated BitTorrent broadcasts.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and write its report bundle")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", help="builtin scenario name (see 'tomo scenarios')")
    src.add_argument("--topology", help="topology JSON file")
    run.add_argument("--iterations", "-n", type=int, default=36)
    run.add_argument("--seed", type=int, default=0, help="master seed (TOMO_SEED overrides)")
    run.add_argument("--root-policy", choices=["fixed", "rotate"], default="fixed")
    run.add_argument("--fragments", type=int, help="file size in fragments")
    run.add_argument("--slots", type=int, help="parallel upload slots per peer")
    run.add_argument("--peer-cap", type=int, help="maximum peer-set size")
    run.add_argument("--cluster-seed", type=int, default=0)
    run.add_argument("--fraction", type=float, default=0.5, help="share of edges kept in the DOT file")
    run.add_argument("--workers", type=int, default=0, help="worker processes (default: available CPUs)")
    run.add_argument("--keep-ledgers", action="store_true", help="also write every per-run ledger")
    run.add_argument("--out", help="output directory for the report bundle")
    run.add_argument("--quiet", "-q", action="store_true")
    run.set_defaults(func=_cmd_run)

    cl = sub.add_parser("cluster", help="Louvain clustering of a weights CSV")
    cl.add_argument("--weights", required=True)
    cl.add_argument("--truth", help="ground-truth partition CSV; reports NMI")
    cl.add_argument("--cluster-seed", type=int, default=0)
    cl.add_argument("--out", help="write the partition here instead of stdout")
    cl.set_defaults(func=_cmd_cluster)

    nm = sub.add_parser("nmi", help="NMI between two partition CSVs")
    nm.add_argument("--a", required=True)
    nm.add_argument("--b", required=True)
    nm.set_defaults(func=_cmd_nmi)

    ex = sub.add_parser("export-dot", help="DOT file of the heaviest edges")
    ex.add_argument("--weights", required=True)
    ex.add_argument("--truth", required=True)
    ex.add_argument("--fraction", type=float, default=0.5)
    ex.add_argument("--out")
    ex.set_defaults(func=_cmd_export_dot)

    sc = sub.add_parser("scenarios", help="list builtin scenarios")
    sc.set_defaults(func=_cmd_scenarios)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, RuntimeError) as exc:
        print(f"tomo: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
