"""Accuracy and runtime experiments over simulated incidents."""

from __future__ import annotations

import csv
import gc
import io
import json
import logging
import time
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .config import EngineConfig
from .engine import localize
from .ranking import RankedCandidate
from .simulator.faults import GroundTruth
from .simulator.scenarios import TYPES, Incident, get_preset, make_incident
from .stats import InvalidInput

log = logging.getLogger(__name__)


@dataclass
class IssueResult:
    ground_truth: GroundTruth
    ranked: list[RankedCandidate]
    wall_time_seconds: float
    edges_examined: int
    detector_calls: int
    error: str | None = None

    def __post_init__(self):
        if self.edges_examined < 0 or self.detector_calls < 0:
            raise InvalidInput("counters must be non-negative")

    @property
    def rank(self) -> int | None:
        """1-based rank of the first candidate matching service and type."""
        gt = self.ground_truth
        for r in self.ranked:
            c = r.candidate
            if c.service == gt.root_service and c.anomaly_type == gt.anomaly_type:
                return r.rank
        return None

    def to_dict(self) -> dict:
        return {
            "ground_truth": self.ground_truth.to_dict(),
            "rank": self.rank,
            "candidates": [r.to_dict() for r in self.ranked],
            "wall_time_seconds": self.wall_time_seconds,
            "edges_examined": self.edges_examined,
            "detector_calls": self.detector_calls,
            "error": self.error,
        }


def _ranks(results) -> list[int | None]:
    results = list(results)
    if not results:
        raise InvalidInput("no results to score")
    return [r.rank if isinstance(r, IssueResult) else r for r in results]


def hr_at_k(results, k: int) -> float:
    """Share of issues whose true root cause is among the top ``k``.

    ``results`` holds :class:`IssueResult` objects or plain ranks
    (``None`` for a miss).
    """
    if k < 1:
        raise InvalidInput("k must be >= 1")
    ranks = _ranks(results)
    return sum(1 for r in ranks if r is not None and r <= k) / len(ranks)


def mrr(results) -> float:
    """Mean reciprocal rank; a missed root cause contributes zero."""
    ranks = _ranks(results)
    return sum(1.0 / r for r in ranks if r is not None) / len(ranks)


def run_issue(incident: Incident, rt_model, ec_model, config: EngineConfig) -> IssueResult:
    truth = incident.truth
    loc = localize(incident.store, truth.initial_service, truth.incident_minute,
                   incident.topology.business_metric, rt_model, ec_model, config)
    return IssueResult(truth, loc.ranked, loc.wall_time_seconds, loc.edges_examined, loc.detector_calls)


@dataclass
class BenchmarkResult:
    config: EngineConfig
    results: list[IssueResult]
    failures: list[dict] = field(default_factory=list)

    def summary(self) -> dict:
        ok = [r for r in self.results if r.error is None]
        if not ok:
            return {"issues": 0, "failures": len(self.failures)}
        return {
            "issues": len(ok),
            "failures": len(self.failures),
            "hr@1": hr_at_k(ok, 1),
            "hr@3": hr_at_k(ok, 3),
            "hr@5": hr_at_k(ok, 5),
            "mrr": mrr(ok),
            "mean_wall_time_seconds": float(np.mean([r.wall_time_seconds for r in ok])),
            "mean_edges_examined": float(np.mean([r.edges_examined for r in ok])),
            "mean_detector_calls": float(np.mean([r.detector_calls for r in ok])),
        }

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "summary": self.summary(),
            "issues": [r.to_dict() for r in self.results],
            "failures": self.failures,
        }


def run_benchmark(scenario_set: Iterable, rt_model, ec_model, config: EngineConfig | None = None) -> BenchmarkResult:
    """Localize every incident; a failing incident is recorded, not fatal.

    ``scenario_set`` yields :class:`Incident` objects or zero-argument
    callables producing one, so generation failures are caught per issue.
    """
    config = config or EngineConfig()
    bench = BenchmarkResult(config, [])
    for i, item in enumerate(scenario_set):
        try:
            inc = item() if callable(item) else item
            bench.results.append(run_issue(inc, rt_model, ec_model, config))
        except Exception as exc:  # batch continues; the failure is reported
            log.warning("issue %d failed: %s", i, exc)
            bench.failures.append({"index": i, "error": f"{type(exc).__name__}: {exc}"})
    return bench


def incident_factories(preset, per_type: int, seed: int = 0, types=TYPES, n_services: int | None = None):
    """Deferred incident constructors in a fixed order."""
    preset = get_preset(preset)
    return [
        (lambda k=k, t=t: make_incident(preset, seed + k, t, n_services))
        for k in range(per_type) for t in types
    ]


@dataclass
class SweepPoint:
    threshold: float
    hr_at_3: float
    mean_wall_time_seconds: float
    mean_edges_examined: float
    candidate_sets: list[list[tuple[str, str]]]

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "hr@3": self.hr_at_3,
            "mean_wall_time_seconds": self.mean_wall_time_seconds,
            "mean_edges_examined": self.mean_edges_examined,
        }


def sweep_pruning_threshold(incidents: list[Incident], thresholds, rt_model, ec_model,
                            config: EngineConfig | None = None) -> list[SweepPoint]:
    """One benchmark per pruning threshold over the same incidents."""
    thresholds = list(thresholds)
    if thresholds != sorted(thresholds):
        raise InvalidInput("thresholds must be sorted ascending")
    config = config or EngineConfig()
    incidents = [i() if callable(i) else i for i in incidents]
    curve = []
    for th in thresholds:
        bench = run_benchmark(incidents, rt_model, ec_model, config.replace(pruning_threshold=th))
        s = bench.summary()
        sets = [sorted((r.candidate.service, r.candidate.anomaly_type.value) for r in res.ranked)
                for res in bench.results]
        curve.append(SweepPoint(th, s["hr@3"], s["mean_wall_time_seconds"], s["mean_edges_examined"], sets))
    return curve


def linear_fit(x, y) -> tuple[float, float, float]:
    """Least-squares line through (x, y) with its R²."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


@dataclass
class ScalingResult:
    sizes: list[int]
    mean_times: list[float]
    hr_at_3: list[float]
    slope: float
    intercept: float
    r2: float

    def to_dict(self) -> dict:
        return {
            "points": [
                {"services": n, "mean_wall_time_seconds": t, "hr@3": h}
                for n, t, h in zip(self.sizes, self.mean_times, self.hr_at_3)
            ],
            "fit": {"slope": self.slope, "intercept": self.intercept, "r2": self.r2},
        }


def _fastest(incident: Incident, rt_model, ec_model, config: EngineConfig, repeats: int) -> IssueResult:
    """Best of ``repeats`` runs with the collector paused, as timeit does."""
    best = None
    enabled = gc.isenabled()
    gc.collect()
    gc.disable()
    try:
        for _ in range(max(1, repeats)):
            r = run_issue(incident, rt_model, ec_model, config)
            if best is None or r.wall_time_seconds < best.wall_time_seconds:
                best = r
    finally:
        if enabled:
            gc.enable()
    return best


def scaling_run(sizes, faults_per_size: int, seed: int, rt_model, ec_model, config: EngineConfig | None = None,
                preset="noisy", repeats: int = 3) -> ScalingResult:
    """Mean localization time per system size and a linear fit.

    Sizes are interleaved within each fault index, so slow spells on a
    shared host spread over all sizes instead of one.  Each incident is
    timed ``repeats`` times and the fastest run is kept.
    """
    sizes = list(sizes)
    if sizes != sorted(sizes):
        raise InvalidInput("sizes must be ascending")
    config = config or EngineConfig()
    preset = get_preset(preset)
    results: dict[int, list[IssueResult]] = {n: [] for n in sizes}
    for k in range(faults_per_size):
        for n in sizes:
            inc = make_incident(preset, seed + k, TYPES[k % 3], n_services=n)
            results[n].append(_fastest(inc, rt_model, ec_model, config, repeats))
    times = [float(np.mean([r.wall_time_seconds for r in results[n]])) for n in sizes]
    hits = [hr_at_k(results[n], 3) for n in sizes]
    slope, intercept, r2 = linear_fit(sizes, times)
    return ScalingResult(sizes, times, hits, slope, intercept, r2)


# -- output ---------------------------------------------------------------

def benchmark_table(bench: BenchmarkResult) -> str:
    s = bench.summary()
    rows = [("issues", s.get("issues", 0)), ("failures", s.get("failures", 0))]
    for k in ("hr@1", "hr@3", "hr@5", "mrr", "mean_wall_time_seconds", "mean_edges_examined"):
        if k in s:
            rows.append((k, f"{s[k]:.4f}"))
    return "\n".join(f"{k:<24}{v}" for k, v in rows)


def sweep_csv(curve: list[SweepPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["threshold", "hr@3", "mean_wall_time_seconds", "mean_edges_examined"])
    for p in curve:
        w.writerow([p.threshold, p.hr_at_3, p.mean_wall_time_seconds, p.mean_edges_examined])
    return buf.getvalue()


def scaling_csv(res: ScalingResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["services", "mean_wall_time_seconds", "hr@3"])
    for n, t, h in zip(res.sizes, res.mean_times, res.hr_at_3):
        w.writerow([n, t, h])
    return buf.getvalue()


def dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True)
