"""Per-edge anomaly verdicts for every anomaly type."""

from __future__ import annotations

import enum
import logging
import threading
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .config import DetectionConfig
from .graph import CallGraph
from .stats import Series, moving_average, pearson, three_sigma_outliers
from .store import EdgeKey, MetricKind

log = logging.getLogger(__name__)

HOUR = 60
DAY = 1440
WEEK = 7 * DAY

# ratio_of_avg when the comparison baseline is zero but the window is not
RATIO_SENTINEL = 1e6


class AnomalyType(str, enum.Enum):
    """Anomaly type with its metric and the side it propagates *from*.

    Performance and reliability anomalies travel from callees to callers, so
    their chains are extended toward callees; traffic anomalies travel from
    callers to callees and are traced back toward callers.
    """

    PERFORMANCE = "Performance"
    RELIABILITY = "Reliability"
    TRAFFIC = "Traffic"

    @property
    def metric(self) -> MetricKind:
        return _METRIC[self]

    @property
    def source_side(self) -> str:
        """Neighbor direction in which the root cause is searched."""
        return "upstream" if self is AnomalyType.TRAFFIC else "downstream"


_METRIC = {
    AnomalyType.PERFORMANCE: MetricKind.RT,
    AnomalyType.RELIABILITY: MetricKind.EC,
    AnomalyType.TRAFFIC: MetricKind.QPS,
}


class ComparisonPeriod(str, enum.Enum):
    LAST_HOUR = "LastHour"
    SAME_HOUR_PREVIOUS_DAY = "SameHourPreviousDay"
    SAME_HOUR_PREVIOUS_WEEK = "SameHourPreviousWeek"

    @property
    def offset(self) -> int:
        return {"LastHour": 0, "SameHourPreviousDay": DAY, "SameHourPreviousWeek": WEEK}[self.value]


RT_FEATURE_NAMES = tuple(
    f"{p.value}.{name}"
    for p in ComparisonPeriod
    for name in ("over_max_count", "delta_of_max", "over_avg_count", "ratio_of_avg")
)
EC_FEATURE_NAMES = (
    "prev_day_delta_outlier",
    "prev_minute_delta_outlier",
    "rt_over_threshold",
    "max_error_rate",
    "ec_rt_correlation",
)


class SeriesProvider(Protocol):
    def history(self, edge: EdgeKey, kind, end_minute: int, length: int) -> Series: ...


class StoreProvider:
    """Adapter exposing :class:`~chainrca.store.MetricStore` as a provider."""

    def __init__(self, store):
        self.store = store

    def history(self, edge, kind, end_minute, length):
        if kind == "REQ":
            return self.store.query_requests(edge, end_minute, length)
        return self.store.query_window(edge, MetricKind(kind), end_minute, length)

    def first_minute(self):
        return self.store.first_minute()


def _first_minute(provider) -> int | None:
    if hasattr(provider, "first_minute"):
        return provider.first_minute()
    return provider.store.first_minute()


@dataclass
class FeatureResult:
    vector: np.ndarray | None
    degraded: bool = False
    skipped: bool = False


def _period_features(current: np.ndarray, period: np.ndarray, ma_window: int) -> list[float]:
    pmax = float(period.max())
    ma_max = float(moving_average(period, ma_window).max())
    cur_mean = float(current.mean())
    if ma_max == 0.0:
        ratio = 0.0 if cur_mean == 0.0 else RATIO_SENTINEL
    else:
        ratio = cur_mean / ma_max
    return [
        float(np.count_nonzero(current > pmax)),
        float(current.max()) - pmax,
        float(np.count_nonzero(current > ma_max)),
        ratio,
    ]


def rt_features_from_windows(current, periods, config: DetectionConfig) -> np.ndarray:
    """The twelve RT features given the detection window and three periods."""
    current = np.asarray(current, dtype=float)
    feats = []
    for period in periods:
        feats.extend(_period_features(current, np.asarray(period, dtype=float), config.moving_average_window))
    return np.array(feats)


def extract_rt_features(provider, edge: EdgeKey, incident_minute: int, config: DetectionConfig) -> FeatureResult:
    w = config.detection_window_minutes
    first = _first_minute(provider)
    last_hour_start = incident_minute - w - HOUR
    if first is None or last_hour_start < first:
        log.info("skipping RT detection on %s: no history before minute %d", edge, last_hour_start)
        return FeatureResult(None, skipped=True)
    current = provider.history(edge, MetricKind.RT, incident_minute, w).values
    periods = []
    degraded = False
    for p in ComparisonPeriod:
        end = incident_minute - w - p.offset
        if end - HOUR < first:
            degraded = True
            end = incident_minute - w
        periods.append(provider.history(edge, MetricKind.RT, end, HOUR).values)
    if degraded:
        log.info("RT features for %s degraded: comparison period predates data", edge)
    return FeatureResult(rt_features_from_windows(current, periods, config), degraded=degraded)


def _delta_outlier_mean(deltas: np.ndarray, w: int) -> float:
    outliers = three_sigma_outliers(deltas, deltas[-w:])
    if not outliers:
        return 0.0
    return float(np.mean([v for _, v in outliers]))


def ec_features_from_windows(
    ec_hour: np.ndarray,
    ec_prev_day: np.ndarray,
    ec_prev_minute: float,
    rt_window: np.ndarray,
    req_window: np.ndarray,
    config: DetectionConfig,
) -> np.ndarray:
    """The five EC features.

    ``ec_hour`` holds the last hour (detection window at the end),
    ``ec_prev_day`` the same clock hour one day earlier, ``ec_prev_minute``
    the value just before ``ec_hour``.
    """
    w = config.detection_window_minutes
    ec_hour = np.asarray(ec_hour, dtype=float)
    day_deltas = ec_hour - np.asarray(ec_prev_day, dtype=float)
    minute_deltas = np.diff(np.concatenate([[ec_prev_minute], ec_hour]))
    ec_win = ec_hour[-w:]
    rt_win = np.asarray(rt_window, dtype=float)
    req_win = np.asarray(req_window, dtype=float)
    rates = np.divide(ec_win, req_win, out=np.zeros_like(ec_win), where=req_win > 0)
    return np.array([
        _delta_outlier_mean(day_deltas, w),
        _delta_outlier_mean(minute_deltas, w),
        1.0 if float(rt_win.mean()) > config.rt_threshold_ms else 0.0,
        float(rates.max()),
        pearson(ec_win, rt_win) if w >= 2 else 0.0,
    ])


def extract_ec_features(provider, edge: EdgeKey, incident_minute: int, config: DetectionConfig) -> FeatureResult:
    w = config.detection_window_minutes
    first = _first_minute(provider)
    if first is None or incident_minute - HOUR - 1 < first:
        log.info("skipping EC detection on %s: less than an hour of history", edge)
        return FeatureResult(None, skipped=True)
    ec61 = provider.history(edge, MetricKind.EC, incident_minute, HOUR + 1).values
    degraded = incident_minute - DAY - HOUR < first
    if degraded:
        log.info("EC features for %s degraded: previous day predates data", edge)
        prev_day = ec61[1:]
    else:
        prev_day = provider.history(edge, MetricKind.EC, incident_minute - DAY, HOUR).values
    rt_win = provider.history(edge, MetricKind.RT, incident_minute, w).values
    req_win = provider.history(edge, "REQ", incident_minute, w).values
    vec = ec_features_from_windows(ec61[1:], prev_day, float(ec61[0]), rt_win, req_win, config)
    return FeatureResult(vec, degraded=degraded)


def traffic_anomalous(qps: np.ndarray, business: np.ndarray, config: DetectionConfig) -> tuple[bool, int, float]:
    """3-sigma outliers in the detection window, gated by business correlation.

    Returns ``(anomalous, n_outliers, correlation)``.
    """
    w = config.detection_window_minutes
    qps = np.asarray(qps, dtype=float)
    outliers = three_sigma_outliers(qps[:-w], qps[-w:])
    corr = pearson(qps, business)
    anomalous = bool(outliers) and abs(corr) >= config.traffic_correlation_threshold
    return anomalous, len(outliers), corr


@dataclass
class AnomalyVerdict:
    anomalous: bool
    anomaly_type: AnomalyType
    edge: EdgeKey
    detail: dict = field(default_factory=dict)


class ConfigurationError(RuntimeError):
    pass


def _rt_shows_increase(vec: np.ndarray) -> bool:
    counts = np.asarray(vec).reshape(3, 4)[:, [0, 2]]
    return bool(np.any(counts > 0))


def rt_rule(vec, model) -> bool:
    """Performance verdict for one RT feature vector.

    A performance anomaly is an RT increase, so windows that never exceed a
    comparison level are normal whatever the separator says.
    """
    return _rt_shows_increase(vec) and bool(model.predict(vec))


def ec_rule(vec, model) -> bool:
    """Reliability verdict for one EC feature vector; a window without a
    single error is normal."""
    return float(vec[3]) > 0.0 and bool(model.predict(vec))


def detect_performance(edge, graph: CallGraph, model, config: DetectionConfig) -> AnomalyVerdict:
    if model is None:
        raise ConfigurationError("performance detection needs a trained one-class model")
    res = extract_rt_features(graph, edge, graph.incident_minute, config)
    verdict = AnomalyVerdict(False, AnomalyType.PERFORMANCE, EdgeKey(*edge))
    if res.skipped:
        verdict.detail["skipped"] = True
        return verdict
    verdict.anomalous = rt_rule(res.vector, model)
    verdict.detail.update(features=res.vector.tolist(), degraded=res.degraded)
    return verdict


def detect_reliability(edge, graph: CallGraph, model, config: DetectionConfig) -> AnomalyVerdict:
    if model is None:
        raise ConfigurationError("reliability detection needs a trained forest")
    res = extract_ec_features(graph, edge, graph.incident_minute, config)
    verdict = AnomalyVerdict(False, AnomalyType.RELIABILITY, EdgeKey(*edge))
    if res.skipped:
        verdict.detail["skipped"] = True
        return verdict
    verdict.anomalous = ec_rule(res.vector, model)
    verdict.detail.update(features=res.vector.tolist(), degraded=res.degraded)
    return verdict


def detect_traffic(edge, graph: CallGraph, business_series: Series, config: DetectionConfig) -> AnomalyVerdict:
    qps = graph.edge_series(edge, MetricKind.QPS).values
    anomalous, n_out, corr = traffic_anomalous(qps, business_series.values, config)
    return AnomalyVerdict(
        anomalous, AnomalyType.TRAFFIC, EdgeKey(*edge), {"outliers": n_out, "business_correlation": corr}
    )


class Detectors:
    """Verdict cache shared by every chain of one localization run."""

    def __init__(self, graph: CallGraph, rt_model, ec_model, business_series: Series, config: DetectionConfig):
        self.graph = graph
        self.rt_model = rt_model
        self.ec_model = ec_model
        self.business = business_series
        self.config = config
        self.calls = 0
        self._cache: dict[tuple[EdgeKey, AnomalyType], AnomalyVerdict] = {}
        self._lock = threading.Lock()

    @property
    def edges_examined(self) -> set[EdgeKey]:
        return {edge for edge, _ in self._cache}

    def verdict(self, edge: EdgeKey, anomaly_type: AnomalyType) -> AnomalyVerdict:
        key = (EdgeKey(*edge), AnomalyType(anomaly_type))
        with self._lock:
            hit = self._cache.get(key)
            if hit is not None:
                return hit
            self.calls += 1
            if key[1] is AnomalyType.PERFORMANCE:
                v = detect_performance(key[0], self.graph, self.rt_model, self.config)
            elif key[1] is AnomalyType.RELIABILITY:
                v = detect_reliability(key[0], self.graph, self.ec_model, self.config)
            else:
                v = detect_traffic(key[0], self.graph, self.business, self.config)
            self._cache[key] = v
            return v
