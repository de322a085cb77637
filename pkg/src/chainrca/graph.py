"""Per-incident service call graph with on-demand metric loading."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

from .store import EdgeKey, MetricKind, MetricStore
from .stats import InvalidInput, Series

UPSTREAM = "upstream"
DOWNSTREAM = "downstream"


@dataclass
class CallGraph:
    """Services that called each other in the call window before the incident.

    Metric series are pulled from the store the first time an edge is
    touched and cached afterwards.  ``series_loads`` counts metric-window
    pulls; ``history_loads`` counts the longer comparison-period pulls that
    detectors make.
    """

    store: MetricStore
    incident_minute: int
    call_window_minutes: int = 30
    metric_window_minutes: int = 60
    nodes: set[str] = field(default_factory=set)
    out_edges: dict[str, list[EdgeKey]] = field(default_factory=dict)
    in_edges: dict[str, list[EdgeKey]] = field(default_factory=dict)
    series_loads: int = 0
    history_loads: int = 0

    def __post_init__(self):
        self._edges: set[EdgeKey] = set()
        self._cache: dict[tuple, Series] = {}
        self._lock = threading.RLock()

    @property
    def edges(self) -> set[EdgeKey]:
        return self._edges

    def _add_edge(self, edge: EdgeKey):
        if edge.caller == edge.callee or edge in self._edges:
            return
        self._edges.add(edge)
        for s in edge:
            self.nodes.add(s)
            self.out_edges.setdefault(s, [])
            self.in_edges.setdefault(s, [])
        self.out_edges[edge.caller].append(edge)
        self.in_edges[edge.callee].append(edge)

    def has_edge(self, edge: EdgeKey) -> bool:
        return edge in self._edges

    def _cached(self, key, loader):
        # one load per key even under threads, so load counters are exact
        with self._lock:
            hit = self._cache.get(key)
            if hit is None:
                hit = self._cache[key] = loader()
            return hit

    def edge_series(self, edge: EdgeKey, kind: MetricKind) -> Series:
        """Metric-window series ending at the incident minute."""
        edge = EdgeKey(*edge)
        if edge not in self._edges:
            raise InvalidInput(f"edge {edge} not in call graph")
        kind = MetricKind(kind)

        def load():
            self.series_loads += 1
            return self.store.query_window(edge, kind, self.incident_minute, self.metric_window_minutes)

        return self._cached(("m", edge, kind), load)

    def history(self, edge: EdgeKey, kind: MetricKind | str, end_minute: int, length: int) -> Series:
        """Arbitrary window of an edge's history; ``kind`` may also be ``"REQ"``."""
        edge = EdgeKey(*edge)
        if edge not in self._edges:
            raise InvalidInput(f"edge {edge} not in call graph")
        if (
            kind != "REQ"
            and end_minute == self.incident_minute
            and length == self.metric_window_minutes
        ):
            return self.edge_series(edge, kind)

        def load():
            self.history_loads += 1
            if kind == "REQ":
                return self.store.query_requests(edge, end_minute, length)
            return self.store.query_window(edge, MetricKind(kind), end_minute, length)

        return self._cached(("h", edge, str(kind), end_minute, length), load)

    def neighbors(self, service: str, direction: str) -> list[tuple[str, EdgeKey]]:
        """Callers (``upstream``) or callees (``downstream``) sorted by id."""
        if service not in self.nodes:
            raise InvalidInput(f"service {service!r} not in call graph")
        if direction == UPSTREAM:
            pairs = [(e.caller, e) for e in self.in_edges[service]]
        elif direction == DOWNSTREAM:
            pairs = [(e.callee, e) for e in self.out_edges[service]]
        else:
            raise InvalidInput(f"direction must be upstream or downstream, got {direction!r}")
        return sorted(pairs)


def build(
    store: MetricStore,
    incident_minute: int,
    call_window: int = 30,
    metric_window: int = 60,
) -> CallGraph:
    """Snapshot of the edges active in ``[incident - call_window, incident)``.

    No metric series are read here.
    """
    graph = CallGraph(store, incident_minute, call_window, metric_window)
    for edge in sorted(store.edges_active(incident_minute, call_window)):
        graph._add_edge(edge)
    return graph
