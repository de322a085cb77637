"""End-to-end localization: graph snapshot, chain analysis, ranking."""

from __future__ import annotations

import time
from dataclasses import dataclass

from . import graph as call_graph
from .config import EngineConfig
from .detection import Detectors
from .propagation import ChainAnalysis, analyze
from .ranking import RankedCandidate, rank_candidates
from .stats import InvalidInput
from .store import MetricStore

REPORT_SCHEMA_VERSION = 1


@dataclass
class Localization:
    initial_service: str
    incident_minute: int
    business_metric: str
    ranked: list[RankedCandidate]
    analysis: ChainAnalysis | None
    edges_examined: int
    detector_calls: int
    series_loads: int
    wall_time_seconds: float
    diagnostic: str | None = None

    def report(self, config: EngineConfig) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "incident": {
                "initial_service": self.initial_service,
                "incident_minute": self.incident_minute,
                "business_metric": self.business_metric,
            },
            "config": config.to_dict(),
            "candidates": [r.to_dict() for r in self.ranked],
            "diagnostic": self.diagnostic,
            "counters": {
                "edges_examined": self.edges_examined,
                "detector_calls": self.detector_calls,
                "series_loads": self.series_loads,
            },
            "trace": self.analysis.to_trace() if self.analysis else {"entry_verdicts": [], "chains": []},
            "wall_time_seconds": self.wall_time_seconds,
        }


def localize(store: MetricStore, initial_service: str, incident_minute: int, business_metric: str,
             rt_model, ec_model, config: EngineConfig | None = None) -> Localization:
    """Rank root-cause candidates for an issue seen on ``initial_service``.

    Raises :class:`InvalidInput` when the service has no calls in the call
    window of a non-empty graph; an empty graph or a run without seeds yields
    an empty ranking with a diagnostic.
    """
    config = config or EngineConfig()
    t0 = time.perf_counter()
    g = call_graph.build(store, incident_minute, config.call_window_minutes, config.metric_window_minutes)
    if not g.nodes:
        return Localization(initial_service, incident_minute, business_metric, [], None, 0, 0, 0,
                            time.perf_counter() - t0, "empty call graph: no calls in the call window")
    if initial_service not in g.nodes:
        raise InvalidInput(f"initial service {initial_service!r} not in call graph")
    business = store.query_business(initial_service, business_metric, incident_minute, config.metric_window_minutes)
    detectors = Detectors(g, rt_model, ec_model, business, config.detection)
    result = analyze(g, initial_service, detectors, config.pruning_threshold, config.threads)
    ranked = rank_candidates(result.candidates, g, business)
    diagnostic = None
    if not result.seeds:
        diagnostic = "no anomalous neighbor consistent with a propagation direction; no candidates"
    return Localization(
        initial_service,
        incident_minute,
        business_metric,
        ranked,
        result,
        len(detectors.edges_examined),
        detectors.calls,
        g.series_loads,
        time.perf_counter() - t0,
        diagnostic,
    )
