"""Built-in experiment topologies modelled on the Grid'5000 sites.

Host access links run at the 890 Mbps measured point-to-point rate. Sites
meet over 10 Gbps wide-area trunks whose single-flow rate is capped at the
787 Mbps measured between sites.
"""

from __future__ import annotations

from typing import Any

from .partition import Partition
from .topology import PhysicalTopology, parse_topology

HOST_MBPS = 890.0
TRUNK_MBPS = 10_000.0
WAN_FLOW_MBPS = 787.0
BOTTLENECK_MBPS = 1_000.0
FABRIC_MBPS = 10_000.0


class UnknownScenario(KeyError):
    pass


class _Doc:
    def __init__(self) -> None:
        self.nodes: list[str] = []
        self.switches: list[str] = []
        self.links: list[dict[str, Any]] = []
        self.truth: dict[str, str] = {}

    def switch(self, name: str) -> str:
        self.switches.append(name)
        return name

    def link(self, a: str, b: str, mbps: float, **extra: Any) -> None:
        self.links.append({"a": a, "b": b, "capacity_mbps": mbps, "duplex": True, **extra})

    def hosts(self, prefix: str, count: int, switch: str, label: str) -> None:
        for i in range(1, count + 1):
            name = f"{prefix}-{i}"
            self.nodes.append(name)
            self.link(name, switch, HOST_MBPS)
            self.truth[name] = label

    def document(self) -> dict[str, Any]:
        return {"nodes": self.nodes, "switches": self.switches, "links": self.links, "ground_truth": self.truth}


def _bordeaux(plage: int, line: int, reau: int, one_cluster: bool = False) -> dict[str, Any]:
    # Bordeplage hangs off the Dell switch; its single 1 GbE uplink to the
    # Cisco switch is the site bottleneck. Borderline and Bordereau share the
    # Cisco fabric, so they form one logical cluster.
    d = _Doc()
    dell = d.switch("dell")
    cisco = d.switch("cisco")
    d.link(dell, cisco, BOTTLENECK_MBPS)
    far = "bordeaux" if one_cluster else "borderline+bordereau"
    if line:
        sw = d.switch("borderline-sw")
        d.link(sw, cisco, FABRIC_MBPS)
        d.hosts("borderline", line, sw, far)
    d.hosts("bordeplage", plage, dell, "bordeaux" if one_cluster else "bordeplage")
    if reau:
        d.hosts("bordereau", reau, cisco, far)
    # keep Bordeplage first so the default root sits on the bottleneck side
    order = sorted(range(len(d.nodes)), key=lambda i: not d.nodes[i].startswith("bordeplage"))
    d.nodes = [d.nodes[i] for i in order]
    return d.document()


def _sites(names: list[str], per_site: int, hub: str | None = None) -> dict[str, Any]:
    d = _Doc()
    if hub is None:
        core = d.switch("renater")
    else:
        core = d.switch(f"{hub}-sw")
    for site in names:
        sw = core if site == hub else d.switch(f"{site}-sw")
        if sw != core:
            d.link(sw, core, TRUNK_MBPS, flow_cap_mbps=WAN_FLOW_MBPS)
        d.hosts(site, per_site, sw, site)
    return d.document()


_BUILDERS = {
    "B": lambda: _bordeaux(32, 5, 27),
    "GT": lambda: _sites(["grenoble", "toulouse"], 32),
    "BGT": lambda: _sites(["bordeaux", "grenoble", "toulouse"], 32),
    "BGTL": lambda: _sites(["bordeaux", "grenoble", "toulouse", "lyon"], 16, hub="lyon"),
    "2x2": lambda: _bordeaux(2, 2, 0, one_cluster=True),
}

DESCRIPTIONS = {
    "B": "Bordeaux site: 32 Bordeplage + 5 Borderline + 27 Bordereau behind one 1 Gbps link (2 logical clusters)",
    "GT": "Grenoble + Toulouse, 32 nodes each over the wide area (2 clusters)",
    "BGT": "Bordeaux + Grenoble + Toulouse, 32 nodes each (3 clusters)",
    "BGTL": "Bordeaux + Grenoble + Toulouse + Lyon, 16 nodes each, star centred on Lyon (4 clusters)",
    "2x2": "2 Bordeplage + 2 Borderline nodes; the 1 Gbps link is not a bottleneck (1 cluster)",
}


def scenario_names() -> list[str]:
    return list(_BUILDERS)


def scenario_document(name: str) -> dict[str, Any]:
    try:
        return _BUILDERS[name]()
    except KeyError:
        raise UnknownScenario(f"unknown scenario {name!r}; choose from {', '.join(_BUILDERS)}") from None


def load_scenario(name: str) -> tuple[PhysicalTopology, Partition]:
    return parse_topology(scenario_document(name))


def builtin_scenarios() -> dict[str, tuple[PhysicalTopology, Partition]]:
    return {name: load_scenario(name) for name in _BUILDERS}
