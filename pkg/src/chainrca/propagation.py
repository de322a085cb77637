"""Anomaly propagation chain analysis with correlation pruning.

Starting from the service where an availability issue surfaced, every
neighbor edge is checked for each anomaly type.  A neighbor whose side
matches the type's propagation direction seeds a chain, which then grows
toward the side the anomaly came from (callees for RT/EC, callers for QPS)
along edges that are anomalous and whose metric trend follows the chain
edge they extend.  Services where a chain stops growing are the candidate
root causes.
"""

from __future__ import annotations

from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .detection import AnomalyType, Detectors
from .graph import DOWNSTREAM, UPSTREAM, CallGraph
from .stats import InvalidInput, pearson
from .store import EdgeKey, MetricKind

TYPE_ORDER = (AnomalyType.PERFORMANCE, AnomalyType.RELIABILITY, AnomalyType.TRAFFIC)


@dataclass
class PropagationChain:
    anomaly_type: AnomalyType
    origin: str
    entry_edge: EdgeKey
    # service -> accepted chain edges into it (the origin holds the entry edge)
    members: dict[str, list[EdgeKey]] = field(default_factory=dict)
    accepted: list[EdgeKey] = field(default_factory=list)
    frontier_history: list[dict] = field(default_factory=list)

    def __post_init__(self):
        self.members.setdefault(self.origin, [self.entry_edge])

    def next_hop(self, edge: EdgeKey) -> str:
        """The service an accepted edge leads to, in traversal direction."""
        return edge.caller if self.anomaly_type.source_side == UPSTREAM else edge.callee

    def prev_hop(self, edge: EdgeKey) -> str:
        return edge.callee if self.anomaly_type.source_side == UPSTREAM else edge.caller

    def to_dict(self) -> dict:
        return {
            "anomaly_type": self.anomaly_type.value,
            "origin": self.origin,
            "entry_edge": list(self.entry_edge),
            "members": {s: [list(e) for e in sorted(es)] for s, es in sorted(self.members.items())},
            "steps": self.frontier_history,
        }


@dataclass(frozen=True)
class CandidateRootCause:
    service: str
    anomaly_type: AnomalyType
    # accepted chain edges leading into the service, sorted
    terminal_edges: tuple[EdgeKey, ...]


def _side_of(graph: CallGraph, service: str):
    for direction in (UPSTREAM, DOWNSTREAM):
        for nb, edge in graph.neighbors(service, direction):
            yield direction, nb, edge


def entry_node_analysis(graph: CallGraph, initial_service: str, detectors: Detectors):
    """Seed chains from the initial service's neighbors.

    All three detectors run on every neighbor edge; a chain is seeded only
    when the neighbor sits on the side the anomaly type propagates from.
    Returns ``(seeds, verdict_log)``.
    """
    if initial_service not in graph.nodes:
        raise InvalidInput(f"initial service {initial_service!r} not in call graph")
    seeds: list[PropagationChain] = []
    verdicts = []
    for direction, nb, edge in _side_of(graph, initial_service):
        for t in TYPE_ORDER:
            v = detectors.verdict(edge, t)
            seeded = v.anomalous and direction == t.source_side
            verdicts.append({
                "neighbor": nb,
                "side": direction,
                "edge": list(edge),
                "anomaly_type": t.value,
                "anomalous": v.anomalous,
                "seeded": seeded,
            })
            if seeded:
                seeds.append(PropagationChain(t, nb, edge))
    return seeds, verdicts


def pruning_check(graph: CallGraph, candidate_edge: EdgeKey, chain_edge: EdgeKey, metric: MetricKind,
                  threshold: float) -> tuple[bool, float | None]:
    """Keep ``candidate_edge`` iff its metric trend correlates with the chain
    edge it would extend by at least ``threshold``.

    A threshold of zero or below switches pruning off; the correlation is
    then not computed (``None``).
    """
    if threshold <= 0:
        return True, None
    r = pearson(graph.edge_series(candidate_edge, metric).values, graph.edge_series(chain_edge, metric).values)
    return r >= threshold, r


def extend_chain(graph: CallGraph, chain: PropagationChain, detectors: Detectors, threshold: float,
                 initial_service: str) -> PropagationChain:
    """Grow ``chain`` breadth-first until no new edge is accepted.

    An edge may be re-tested for pruning when the node it leaves is reached
    again through a different chain edge, so membership does not depend on
    visiting order.  Each detector runs at most once per edge.
    """
    t = chain.anomaly_type
    side = t.source_side
    accepted = set(chain.accepted)
    queue = deque((node, e) for node, es in chain.members.items() for e in es)
    while queue:
        cur, via = queue.popleft()
        for nb, edge in graph.neighbors(cur, side):
            if nb == initial_service or edge in accepted:
                continue
            v = detectors.verdict(edge, t)
            step = {"from": cur, "to": nb, "edge": list(edge), "via": list(via), "anomalous": v.anomalous}
            if not v.anomalous:
                chain.frontier_history.append(step)
                continue
            keep, corr = pruning_check(graph, edge, via, t.metric, threshold)
            step.update(correlation=corr, pruned=not keep)
            chain.frontier_history.append(step)
            if not keep:
                continue
            accepted.add(edge)
            chain.accepted.append(edge)
            chain.members.setdefault(nb, []).append(edge)
            queue.append((nb, edge))
    return chain


def chain_endpoints(chain: PropagationChain) -> list[str]:
    """Members from which the chain cannot grow further.

    These are the members of terminal strongly connected components of the
    accepted-edge graph; on acyclic chains, simply the members with no
    accepted outgoing edge.
    """
    succ: dict[str, set[str]] = {s: set() for s in chain.members}
    for e in chain.accepted:
        succ[chain.prev_hop(e)].add(chain.next_hop(e))

    def reach(s):
        seen = {s}
        todo = [s]
        while todo:
            for n in succ[todo.pop()]:
                if n not in seen:
                    seen.add(n)
                    todo.append(n)
        return seen

    reachable = {s: reach(s) for s in succ}
    return sorted(s for s in succ if all(s in reachable[r] for r in reachable[s]))


def collect_candidates(chains: list[PropagationChain]) -> list[CandidateRootCause]:
    """One candidate per (endpoint service, anomaly type) across all chains."""
    edges: dict[tuple[str, AnomalyType], set[EdgeKey]] = {}
    for chain in chains:
        for s in chain_endpoints(chain):
            edges.setdefault((s, chain.anomaly_type), set()).update(chain.members[s])
    return [
        CandidateRootCause(s, t, tuple(sorted(edges[(s, t)])))
        for s, t in sorted(edges, key=lambda k: (k[0], k[1].value))
    ]


@dataclass
class ChainAnalysis:
    seeds: list[PropagationChain]
    entry_verdicts: list[dict]
    candidates: list[CandidateRootCause]

    def to_trace(self) -> dict:
        return {
            "entry_verdicts": self.entry_verdicts,
            "chains": [c.to_dict() for c in self.seeds],
        }


def analyze(graph: CallGraph, initial_service: str, detectors: Detectors, threshold: float = 0.7,
            threads: int = 1) -> ChainAnalysis:
    seeds, verdicts = entry_node_analysis(graph, initial_service, detectors)
    if threads > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda c: extend_chain(graph, c, detectors, threshold, initial_service), seeds))
    else:
        for c in seeds:
            extend_chain(graph, c, detectors, threshold, initial_service)
    return ChainAnalysis(seeds, verdicts, collect_candidates(seeds))
