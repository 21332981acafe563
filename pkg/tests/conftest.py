from __future__ import annotations

import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def two_node_doc(mbps: float = 890.0) -> dict:
    return {"nodes": ["a", "b"], "links": [{"a": "a", "b": "b", "capacity_mbps": mbps}]}


def star_doc(n: int, mbps: float = 100.0, labels: list[str] | None = None) -> dict:
    nodes = [f"h{i}" for i in range(n)]
    doc = {
        "nodes": nodes,
        "switches": ["sw"],
        "links": [{"a": h, "b": "sw", "capacity_mbps": mbps} for h in nodes],
    }
    if labels is not None:
        doc["ground_truth"] = dict(zip(nodes, labels))
    return doc


@pytest.fixture
def two_node():
    return two_node_doc()


# one summary line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
