"""Physical network model: hosts, switches, capacity-labelled links.

A topology document is a JSON-compatible mapping::

    {
      "nodes": ["h1", "h2", ...],
      "switches": ["s1", ...],
      "links": [{"a": "h1", "b": "s1", "capacity_mbps": 890, "duplex": true}, ...],
      "ground_truth": {"h1": "site-a", ...}
    }

Links may also carry ``flow_cap_mbps``, a ceiling on the rate of any single
flow routed over the link (used for wide-area paths whose per-connection
throughput is lower than the shared trunk capacity).
"""

from __future__ import annotations

import json
import math
from collections import deque
from collections.abc import Mapping
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any

import numpy as np

from .partition import Partition

MBPS = 1e6


class TopologyError(ValueError):
    """Raised for malformed or invalid topology documents."""


@dataclass(frozen=True)
class Link:
    a: int
    b: int
    capacity: float  # bits per second
    duplex: bool = True
    flow_cap: float | None = None  # bits per second, per flow


@dataclass(frozen=True, eq=False)
class PhysicalTopology:
    """Immutable network description.

    Vertices ``0..N-1`` are hosts (``NodeId``) in declaration order; switches
    follow as ``N..N+S-1``.
    """

    nodes: tuple[str, ...]
    switches: tuple[str, ...]
    links: tuple[Link, ...]
    _adj: tuple[tuple[tuple[int, int], ...], ...] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self.n_vertices)]
        for i, link in enumerate(self.links):
            adj[link.a].append((i, link.b))
            adj[link.b].append((i, link.a))
        object.__setattr__(self, "_adj", tuple(tuple(sorted(x)) for x in adj))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PhysicalTopology):
            return NotImplemented
        return (self.nodes, self.switches, self.links) == (other.nodes, other.switches, other.links)

    def __hash__(self) -> int:
        return hash((self.nodes, self.switches, self.links))

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def n_vertices(self) -> int:
        return len(self.nodes) + len(self.switches)

    def vertex_name(self, v: int) -> str:
        return self.nodes[v] if v < self.n else self.switches[v - self.n]

    def access_link(self, node: int) -> Link:
        (idx, _), = self._adj[node]
        return self.links[idx]

    @property
    def node_nic_capacity(self) -> np.ndarray:
        """Access-link capacity of every host, bits per second."""
        return np.array([self.access_link(v).capacity for v in range(self.n)])

    def _bfs_dist(self, dst: int) -> list[int]:
        dist = [-1] * self.n_vertices
        dist[dst] = 0
        queue = deque([dst])
        while queue:
            u = queue.popleft()
            for _, v in self._adj[u]:
                # hosts are leaves; never transit through one
                if dist[v] == -1:
                    dist[v] = dist[u] + 1
                    if v >= self.n:
                        queue.append(v)
        return dist

    def _path(self, src: int, dst: int) -> list[int]:
        dist = self._bfs_dist(dst)
        if dist[src] < 0:
            raise TopologyError(f"no path from {self.vertex_name(src)} to {self.vertex_name(dst)}")
        path: list[int] = []
        u = src
        while u != dst:
            # adjacency is sorted by link index: first hit is the lexicographic minimum
            for idx, v in self._adj[u]:
                if dist[v] == dist[u] - 1 and (v >= self.n or v == dst):
                    path.append(idx)
                    u = v
                    break
        return path

    def route(self, src: int, dst: int) -> list[Link]:
        return [self.links[i] for i in self.route_indices(src, dst)]

    def route_indices(self, src: int, dst: int) -> list[int]:
        """Link indices on the hop-shortest path from ``src`` to ``dst``.

        Ties resolve to the smallest lexicographic link-index sequence walked
        from the lower-numbered endpoint, so a route and its reverse always
        use the same links.
        """
        if src == dst:
            raise ValueError("route needs two distinct nodes")
        for v in (src, dst):
            if not 0 <= v < self.n:
                raise ValueError(f"unknown node {v}")
        if src < dst:
            return self._path(src, dst)
        return self._path(dst, src)[::-1]

    @cached_property
    def channel_table(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Capacity resources and per-pair routes for flow-rate computation.

        Returns ``(capacity, route, route_len, flow_cap)``: ``capacity[c]`` of
        every directed channel (one per direction of a duplex link, one shared
        channel for a half-duplex link), ``route[s, r]`` the channels crossed by
        a flow from ``s`` to ``r`` padded with -1, and ``flow_cap[s, r]`` the
        per-flow ceiling (``inf`` when none applies).
        """
        caps: list[float] = []
        chan: list[tuple[int, int]] = []
        for link in self.links:
            fwd = len(caps)
            caps.append(link.capacity)
            if link.duplex:
                caps.append(link.capacity)
                chan.append((fwd, fwd + 1))
            else:
                chan.append((fwd, fwd))
        n = self.n
        paths = {(s, r): self.route_indices(s, r) for s in range(n) for r in range(n) if s != r}
        width = max((len(p) for p in paths.values()), default=1)
        route = np.full((n, n, width), -1, dtype=np.int32)
        length = np.zeros((n, n), dtype=np.int32)
        flow_cap = np.full((n, n), np.inf)
        for (s, r), p in paths.items():
            u = s
            for j, idx in enumerate(p):
                link = self.links[idx]
                forward = link.a == u
                route[s, r, j] = chan[idx][0] if forward else chan[idx][1]
                u = link.b if forward else link.a
                if link.flow_cap is not None:
                    flow_cap[s, r] = min(flow_cap[s, r], link.flow_cap)
            length[s, r] = len(p)
        for arr in (route, length, flow_cap):
            arr.setflags(write=False)
        return np.array(caps), route, length, flow_cap

    def to_document(self, truth: Partition | None = None) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "nodes": list(self.nodes),
            "switches": list(self.switches),
            "links": [],
        }
        for link in self.links:
            item: dict[str, Any] = {
                "a": self.vertex_name(link.a),
                "b": self.vertex_name(link.b),
                "capacity_mbps": link.capacity / MBPS,
                "duplex": link.duplex,
            }
            if link.flow_cap is not None:
                item["flow_cap_mbps"] = link.flow_cap / MBPS
            doc["links"].append(item)
        if truth is not None:
            doc["ground_truth"] = {name: lab for name, lab in zip(self.nodes, truth.labels)}
        return doc


def _capacity(item: Mapping[str, Any], key: str, where: str, required: bool) -> float | None:
    if key not in item:
        if required:
            raise TopologyError(f"{where}: missing '{key}'")
        return None
    value = item[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise TopologyError(f"{where}: '{key}' must be a finite number, got {value!r}")
    if value <= 0:
        raise TopologyError(f"{where}: '{key}' must be positive, got {value!r}")
    return float(value) * MBPS


def parse_topology(document: Mapping[str, Any] | str) -> tuple[PhysicalTopology, Partition]:
    """Validate a topology document and return it with its ground truth.

    ``document`` is either the decoded mapping or its JSON text. Without a
    ``ground_truth`` key every node lands in a single cluster.
    """
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise TopologyError(f"invalid JSON: {exc}") from exc
    if not isinstance(document, Mapping):
        raise TopologyError("topology document must be a mapping")
    unknown = set(document) - {"nodes", "switches", "links", "ground_truth"}
    if unknown:
        raise TopologyError(f"unknown top-level keys: {sorted(unknown)}")

    nodes = document.get("nodes")
    if not isinstance(nodes, list) or not all(isinstance(x, str) for x in nodes):
        raise TopologyError("'nodes' must be a list of names")
    if len(nodes) < 2:
        raise TopologyError(f"'nodes' needs at least 2 entries, got {len(nodes)}")
    switches = document.get("switches", [])
    if not isinstance(switches, list) or not all(isinstance(x, str) for x in switches):
        raise TopologyError("'switches' must be a list of names")
    index: dict[str, int] = {}
    for i, name in enumerate([*nodes, *switches]):
        if name in index:
            raise TopologyError(f"duplicate name {name!r}")
        index[name] = i

    raw_links = document.get("links")
    if not isinstance(raw_links, list):
        raise TopologyError("'links' must be a list")
    links: list[Link] = []
    pairs: set[frozenset[int]] = set()
    for i, item in enumerate(raw_links):
        if not isinstance(item, Mapping):
            raise TopologyError(f"links[{i}]: must be a mapping")
        where = f"links[{i}] ({item.get('a')!s}-{item.get('b')!s})"
        extra = set(item) - {"a", "b", "capacity_mbps", "duplex", "flow_cap_mbps"}
        if extra:
            raise TopologyError(f"{where}: unknown keys {sorted(extra)}")
        for end in ("a", "b"):
            if end not in item:
                raise TopologyError(f"{where}: missing '{end}'")
            if item[end] not in index:
                raise TopologyError(f"{where}: unknown endpoint {item[end]!r}")
        a, b = index[item["a"]], index[item["b"]]
        if a == b:
            raise TopologyError(f"{where}: self-link")
        if frozenset((a, b)) in pairs:
            raise TopologyError(f"{where}: duplicate link between the same endpoints")
        pairs.add(frozenset((a, b)))
        duplex = item.get("duplex", True)
        if not isinstance(duplex, bool):
            raise TopologyError(f"{where}: 'duplex' must be a boolean")
        capacity = _capacity(item, "capacity_mbps", where, required=True)
        flow_cap = _capacity(item, "flow_cap_mbps", where, required=False)
        links.append(Link(a, b, capacity, duplex, flow_cap))  # type: ignore[arg-type]

    topo = PhysicalTopology(tuple(nodes), tuple(switches), tuple(links))
    for v in range(topo.n):
        deg = len(topo._adj[v])
        if deg != 1:
            raise TopologyError(f"node {nodes[v]!r} has {deg} access links, expected exactly 1")
    # hosts are leaves, so switch-level connectivity decides reachability
    dist = topo._bfs_dist(0)
    for v in range(topo.n_vertices):
        if dist[v] < 0:
            raise TopologyError(f"graph is disconnected: {topo.vertex_name(v)!r} unreachable from {nodes[0]!r}")

    gt = document.get("ground_truth")
    if gt is None:
        truth = Partition.from_labels([0] * len(nodes))
    else:
        if not isinstance(gt, Mapping):
            raise TopologyError("'ground_truth' must map node names to labels")
        stray = set(gt) - set(nodes)
        if stray:
            raise TopologyError(f"ground_truth: unknown nodes {sorted(stray)}")
        missing = [name for name in nodes if name not in gt]
        if missing:
            raise TopologyError(f"ground_truth: no label for {missing[:5]}")
        truth = Partition.from_labels([gt[name] for name in nodes])
    return topo, truth


def load_topology(path: str | Path) -> tuple[PhysicalTopology, Partition]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise TopologyError(f"{path}: {exc.strerror}") from exc
    try:
        return parse_topology(text)
    except TopologyError as exc:
        raise TopologyError(f"{path}: {exc}") from exc


def dump_topology(topology: PhysicalTopology, truth: Partition | None = None) -> str:
    return json.dumps(topology.to_document(truth), indent=2) + "\n"
