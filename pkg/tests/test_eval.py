import itertools
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bttomo.eval import TracePoint, convergence_trace, nmi, read_trace
from bttomo.metric import MeasurementGraph
from bttomo.partition import Partition
from bttomo.swarm import TransferLedger
from oracles import nmi_oracle

labels = st.integers(1, 10).flatmap(
    lambda n: st.tuples(st.lists(st.integers(0, 4), min_size=n, max_size=n),
                        st.lists(st.integers(0, 4), min_size=n, max_size=n))
)


def P(*xs):
    return Partition.from_labels(xs)


def test_identity_and_degenerate_cases():
    assert nmi(P(0, 0, 1, 1), P(5, 5, 2, 2)) == 1.0
    assert nmi(P(0, 0, 0), P(0, 0, 0)) == 1.0
    assert nmi(P(0, 0, 0, 0), P(0, 0, 1, 1)) == 0.0
    assert nmi(P(0, 1, 2, 3), P(0, 0, 0, 0)) == 0.0


def test_merged_cluster_example():
    truth = Partition.from_clusters([[0, 1], [2, 3], [4, 5]])
    found = Partition.from_clusters([[0, 1, 2, 3], [4, 5]])
    value = nmi(found, truth)
    assert 0.5 < value < 1.0
    assert value == pytest.approx(nmi_oracle(found.labels, truth.labels), abs=1e-12)
    # I = H(found) = log 3 - 2/3 log 2, normalised by H(truth) = log 3
    assert value == pytest.approx(1 - 2 * np.log(2) / (3 * np.log(3)), abs=1e-12)


@given(labels)
def test_matches_oracle_symmetric_and_bounded(pair):
    a, b = (Partition.from_labels(x) for x in pair)
    v = nmi(a, b)
    assert v == pytest.approx(nmi_oracle(a.labels, b.labels), abs=1e-12)
    assert v == nmi(b, a)
    assert 0.0 <= v <= 1.0


@given(labels, st.permutations(range(5)))
def test_label_permutation_invariance(pair, perm):
    a, b = (Partition.from_labels(x) for x in pair)
    relabeled = Partition.from_labels([perm[x] for x in pair[0]])
    assert nmi(relabeled, b) == nmi(a, b)


def test_size_mismatch():
    with pytest.raises(ValueError):
        nmi(P(0, 1), P(0, 1, 1))


def _clique_ledger(n_per, k, seed, noise=1):
    """Ledger whose intra-cluster traffic dominates."""
    rng = random.Random(seed)
    n = n_per * k
    c = np.zeros((n, n), dtype=np.int64)
    for s, r in itertools.permutations(range(n), 2):
        same = s // n_per == r // n_per
        c[s, r] = rng.randint(5, 10) if same else rng.randint(0, noise)
    return TransferLedger(c, np.zeros(n), 1, 0)


def test_convergence_trace_shape_and_values(tmp_path):
    truth = Partition.from_labels([v // 4 for v in range(12)])
    runs = [_clique_ledger(4, 3, s) for s in range(5)]
    trace = convergence_trace(runs, truth, cluster_seed=1)
    assert [p.n for p in trace.points] == [1, 2, 3, 4, 5]
    assert all(p.nmi == 1.0 and p.k == 3 for p in trace.points)
    assert trace.first_perfect() == 1
    assert trace.graph.iterations == 5
    assert trace.final.partition == truth
    trace.write(tmp_path / "t.csv")
    assert read_trace(tmp_path / "t.csv") == list(trace.points)
    assert trace.to_csv().startswith("n,nmi,modularity,k\n1,1.0,")


def test_convergence_trace_accepts_graphs_and_single_run():
    truth = Partition((0, 0, 1))
    trace = convergence_trace([MeasurementGraph(3, {(0, 1): 4, (1, 2): 1})], truth)
    assert len(trace.points) == 1
    assert isinstance(trace.points[0], TracePoint)
    with pytest.raises(ValueError):
        convergence_trace([], truth)


def test_first_perfect_none():
    truth = Partition((0, 1, 0, 1))
    trace = convergence_trace([MeasurementGraph(4, {(0, 1): 4, (2, 3): 4})], truth)
    assert trace.first_perfect() is None
