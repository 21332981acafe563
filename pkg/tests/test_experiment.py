import json

import pytest

from bttomo.experiment import ExperimentConfig, RootPolicy, rotate_root, run_experiment
from bttomo.metric import MeasurementGraph
from bttomo.partition import Partition
from conftest import star_doc


@pytest.mark.parametrize(
    "policy, iteration, n, root",
    [("rotate", 0, 64, 0), ("rotate", 65, 64, 1), ("fixed", 0, 64, 0), ("fixed", 65, 64, 0), (RootPolicy.ROTATE, 7, 4, 3)],
)
def test_rotate_root(policy, iteration, n, root):
    assert rotate_root(policy, iteration, n) == root


def test_rotate_root_rejects_unknown_policy():
    with pytest.raises(ValueError):
        rotate_root("random", 0, 4)


def test_config_validation():
    with pytest.raises(ValueError, match="exactly one"):
        ExperimentConfig()
    with pytest.raises(ValueError, match="exactly one"):
        ExperimentConfig(scenario="B", topology_path="x.json")
    with pytest.raises(ValueError, match="iterations"):
        ExperimentConfig(scenario="B", iterations=0)
    with pytest.raises(ValueError):
        ExperimentConfig(scenario="B", root_policy="sometimes")


def test_swarm_config_overrides_and_seeds():
    cfg = ExperimentConfig(scenario="2x2", seed=7, fragments=100, slots=2, peer_cap=10, root_policy="rotate")
    a, b = cfg.swarm_config(0, 4), cfg.swarm_config(5, 4)
    assert (a.file_size_fragments, a.max_parallel_uploads, a.max_peer_set) == (100, 2, 10)
    assert (a.root, b.root) == (0, 1)
    assert a.rng_seed != b.rng_seed
    assert cfg.swarm_config(5, 4) == b


def test_small_experiment_bundle(tmp_path):
    cfg = ExperimentConfig(scenario="2x2", iterations=3, seed=42, fragments=500, out_dir=str(tmp_path), keep_ledgers=True)
    report = run_experiment(cfg)
    assert len(report.trace.points) == 3 and len(report.runs) == 3
    # the 1 Gbps uplink is no bottleneck here: one logical cluster
    assert all(p.k == 1 and p.nmi == 1.0 for p in report.trace.points)
    assert report.nmi == 1.0
    names = {p.name for p in tmp_path.iterdir()}
    assert {"trace.csv", "partition.csv", "truth.csv", "weights.csv", "graph.dot", "report.json", "ledgers"} <= names
    assert len(list((tmp_path / "ledgers").glob("run-*.csv"))) == 6  # ledger + completion times
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["config"]["scenario"] == "2x2" and len(doc["runs"]) == 3
    assert Partition.read(tmp_path / "partition.csv") == report.partition
    weights = MeasurementGraph.read(tmp_path / "weights.csv", n=4)
    assert float(weights.total_weight()) == pytest.approx(3 * 500)


def test_single_iteration_and_topology_file(tmp_path):
    path = tmp_path / "star.json"
    path.write_text(json.dumps(star_doc(6, labels=list("aaabbb"))))
    report = run_experiment(ExperimentConfig(topology_path=str(path), iterations=1, fragments=200))
    assert len(report.trace.points) == 1
    assert 0.0 <= report.nmi <= 1.0
    assert report.weights.total_weight() == 5 * 200


def test_artifacts_independent_of_worker_count(tmp_path):
    base = dict(scenario="2x2", iterations=4, seed=3, fragments=300, root_policy="rotate")
    a = run_experiment(ExperimentConfig(**base, out_dir=str(tmp_path / "a"), workers=1))
    b = run_experiment(ExperimentConfig(**base, out_dir=str(tmp_path / "b"), workers=2))
    assert [r.digest for r in a.runs] == [r.digest for r in b.runs]
    assert [r.root for r in a.runs] == [0, 1, 2, 3]
    for name in ("trace.csv", "partition.csv", "weights.csv", "graph.dot"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_distinct_iterations_give_distinct_ledgers():
    report = run_experiment(ExperimentConfig(scenario="2x2", iterations=30, seed=1, fragments=200))
    assert len({r.digest for r in report.runs}) == 30
    assert len({r.seed for r in report.runs}) == 30
