"""Order candidate root causes by how closely their metric tracks the
business metric of the initial service."""

from __future__ import annotations

from dataclasses import dataclass

from .graph import CallGraph
from .propagation import CandidateRootCause
from .stats import InvalidInput, Series, pearson
from .store import EdgeKey


@dataclass(frozen=True)
class RankedCandidate:
    candidate: CandidateRootCause
    score: float
    rank: int
    terminal_edge: EdgeKey

    def to_dict(self) -> dict:
        c = self.candidate
        return {
            "rank": self.rank,
            "service": c.service,
            "anomaly_type": c.anomaly_type.value,
            "score": self.score,
            "terminal_edge": list(self.terminal_edge),
        }


def candidate_score(candidate: CandidateRootCause, graph: CallGraph, business_series: Series) -> tuple[float, EdgeKey]:
    """Best |pearson(business, edge metric)| over the candidate's terminal
    edges, with the edge that achieves it (smallest edge on ties)."""
    best, best_edge = -1.0, None
    for e in candidate.terminal_edges:
        series = graph.edge_series(e, candidate.anomaly_type.metric)
        r = abs(pearson(business_series.values, series.values))
        if r > best:
            best, best_edge = r, e
    return best, best_edge


def rank_candidates(candidates: list[CandidateRootCause], graph: CallGraph, business_series: Series) -> list[RankedCandidate]:
    """Sort by score descending; ties break on (service, anomaly type name)."""
    scored = []
    for c in candidates:
        if not c.terminal_edges:
            raise InvalidInput(f"candidate {c.service} has no terminal edge")
        score, edge = candidate_score(c, graph, business_series)
        scored.append((score, c, edge))
    scored.sort(key=lambda sc: (-sc[0], sc[1].service, sc[1].anomaly_type.value))
    return [RankedCandidate(c, s, i, e) for i, (s, c, e) in enumerate(scored, 1)]
