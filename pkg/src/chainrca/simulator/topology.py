"""Layered microservice call topologies.

Layers run proxy -> gateway -> entry -> mid... -> leaf.  Entry services
carry the business metric.  A fraction of extra edges skip layers and a
smaller fraction point back from deeper mid-tier services to shallower ones,
so cyclic call graphs occur.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..stats import InvalidInput
from ..store import EdgeKey

DENSITY_CAP = 8.0


@dataclass
class Topology:
    services: list[str]
    edges: list[EdgeKey]
    entry_services: list[str]
    layers: dict[str, int] = field(default_factory=dict)
    business_metric: str = "orders"

    def __post_init__(self):
        self.edges = sorted(EdgeKey(*e) for e in self.edges)
        known = set(self.services)
        for e in self.edges:
            if e.caller == e.callee:
                raise InvalidInput(f"self-loop {e}")
            if e.caller not in known or e.callee not in known:
                raise InvalidInput(f"edge {e} references unknown service")
        if not set(self.entry_services) <= known:
            raise InvalidInput("entry services must be topology services")
        self._in = {s: [] for s in self.services}
        self._out = {s: [] for s in self.services}
        for e in self.edges:
            self._out[e.caller].append(e)
            self._in[e.callee].append(e)

    def in_edges(self, s: str) -> list[EdgeKey]:
        return self._in[s]

    def out_edges(self, s: str) -> list[EdgeKey]:
        return self._out[s]

    def reaches(self, src: str, dst: str) -> bool:
        """True if ``dst`` is reachable from ``src`` following calls."""
        seen = {src}
        todo = deque([src])
        while todo:
            s = todo.popleft()
            if s == dst:
                return True
            for e in self._out[s]:
                if e.callee not in seen:
                    seen.add(e.callee)
                    todo.append(e.callee)
        return False

    def components(self) -> dict[str, int]:
        """Strongly connected component id of every service (Kosaraju)."""
        order: list[str] = []
        seen: set[str] = set()
        for root in self.services:
            if root in seen:
                continue
            seen.add(root)
            stack = [(root, iter(self._out[root]))]
            while stack:
                s, it = stack[-1]
                nxt = next(it, None)
                if nxt is None:
                    stack.pop()
                    order.append(s)
                elif nxt.callee not in seen:
                    seen.add(nxt.callee)
                    stack.append((nxt.callee, iter(self._out[nxt.callee])))
        comp: dict[str, int] = {}
        cid = -1
        for root in reversed(order):
            if root in comp:
                continue
            cid += 1
            comp[root] = cid
            todo = [root]
            while todo:
                for e in self._in[todo.pop()]:
                    if e.caller not in comp:
                        comp[e.caller] = cid
                        todo.append(e.caller)
        return comp

    def is_connected(self) -> bool:
        if not self.services:
            return True
        adj = {s: set() for s in self.services}
        for e in self.edges:
            adj[e.caller].add(e.callee)
            adj[e.callee].add(e.caller)
        seen = {self.services[0]}
        todo = [self.services[0]]
        while todo:
            for n in adj[todo.pop()]:
                if n not in seen:
                    seen.add(n)
                    todo.append(n)
        return len(seen) == len(self.services)

    def to_dict(self) -> dict:
        return {
            "services": self.services,
            "edges": [list(e) for e in self.edges],
            "entry_services": self.entry_services,
            "layers": self.layers,
            "business_metric": self.business_metric,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Topology":
        return cls(
            list(d["services"]),
            [EdgeKey(*e) for e in d["edges"]],
            list(d["entry_services"]),
            dict(d.get("layers", {})),
            d.get("business_metric", "orders"),
        )

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))


def _layer_sizes(n: int, mid_layers: int | None = None) -> list[int]:
    if n < 2:
        raise InvalidInput("need at least two services")
    if n < 6:
        # tiny systems: a straight proxy -> entry -> ... line of layers
        return [1] * n
    proxies = max(1, round(0.04 * n))
    gateways = max(1, round(0.06 * n))
    entries = max(1, round(0.08 * n))
    leaves = max(1, round(0.30 * n))
    mids = n - proxies - gateways - entries - leaves
    n_mid_layers = mid_layers if mid_layers else (2 if n < 500 else 3)
    mid_layers = [mids // n_mid_layers + (1 if i < mids % n_mid_layers else 0) for i in range(n_mid_layers)]
    sizes = [proxies, gateways, entries] + [m for m in mid_layers if m > 0] + [leaves]
    return sizes


def generate_topology(
    n_services: int,
    avg_out_degree: float = 2.5,
    seed: int = 0,
    cross_fraction: float = 0.1,
    back_fraction: float = 0.05,
    mid_layers: int | None = None,
) -> Topology:
    """Deterministic layered topology; ``avg_out_degree`` is edges per service.

    ``mid_layers`` sets the call depth between entry and leaf services
    (default 2, or 3 from 500 services on).
    """
    if avg_out_degree <= 0 or avg_out_degree > DENSITY_CAP:
        raise InvalidInput(f"avg_out_degree must lie in (0, {DENSITY_CAP}]")
    if mid_layers is not None and mid_layers < 1:
        raise InvalidInput("mid_layers must be >= 1")
    sizes = _layer_sizes(n_services, mid_layers)
    rng = np.random.default_rng(seed)
    width = len(str(n_services))
    services = [f"s{i:0{width}d}" for i in range(n_services)]
    layers: dict[str, int] = {}
    by_layer: list[list[str]] = []
    i = 0
    for li, size in enumerate(sizes):
        by_layer.append(services[i:i + size])
        for s in services[i:i + size]:
            layers[s] = li
        i += size
    entry_layer = min(2, len(sizes) - 1) if len(sizes) >= 3 else len(sizes) - 1
    n_layers = len(sizes)
    leaf_layer = n_layers - 1

    edges: set[EdgeKey] = set()

    def add(a, b):
        if a != b:
            edges.add(EdgeKey(a, b))

    # every service below the top has a caller one layer up, every service
    # above the leaves has a callee one layer down
    for li in range(1, n_layers):
        for s in by_layer[li]:
            add(by_layer[li - 1][rng.integers(len(by_layer[li - 1]))], s)
    callers = {e.caller for e in edges}
    for li in range(n_layers - 1):
        for s in by_layer[li]:
            if s not in callers:
                add(s, by_layer[li + 1][rng.integers(len(by_layer[li + 1]))])

    target = int(round(avg_out_degree * n_services))
    max_edges = sum(sizes[a] * sizes[a + 1] for a in range(n_layers - 1))
    if n_layers > 2:
        max_edges += sum(sizes[a] * sizes[b] for a in range(n_layers) for b in range(a + 2, n_layers))
    if target > max_edges:
        raise InvalidInput(f"avg_out_degree {avg_out_degree} infeasible for {n_services} services")
    mid_layers = list(range(entry_layer + 1, leaf_layer))
    attempts = 0
    while len(edges) < target and attempts < 50 * target + 100:
        attempts += 1
        u = rng.random()
        if u < back_fraction and len(mid_layers) >= 2:
            hi = rng.integers(1, len(mid_layers))
            lo = rng.integers(0, hi)
            a_layer, b_layer = mid_layers[hi], mid_layers[lo]
        elif u < back_fraction + cross_fraction and n_layers > 2:
            a_layer = rng.integers(0, n_layers - 2)
            b_layer = rng.integers(a_layer + 2, n_layers)
        else:
            a_layer = rng.integers(0, n_layers - 1)
            b_layer = a_layer + 1
        a = by_layer[a_layer][rng.integers(len(by_layer[a_layer]))]
        b = by_layer[b_layer][rng.integers(len(by_layer[b_layer]))]
        add(a, b)
    return Topology(services, sorted(edges), list(by_layer[entry_layer]), layers)


EXAMPLE_EDGES = [
    ("S1", "S4"), ("S4", "S5"), ("S5", "S7"), ("S6", "S7"), ("S7", "S9"),
    ("S7", "S10"), ("S2", "S5"), ("S5", "S8"), ("S3", "S6"),
]


def example_topology() -> Topology:
    """Ten-service worked example: S5 is the entry service with business metric."""
    services = [f"S{i}" for i in range(1, 11)]
    layers = {"S1": 0, "S2": 0, "S3": 0, "S4": 1, "S6": 1, "S5": 2, "S7": 3, "S8": 3, "S9": 4, "S10": 4}
    return Topology(services, [EdgeKey(*e) for e in EXAMPLE_EDGES], ["S5"], layers)
