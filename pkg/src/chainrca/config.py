"""Engine configuration.  Defaults are the thresholds used in production
deployments of the method: 50 ms RT threshold for reliability features,
0.9 traffic/business correlation gate, 0.7 pruning correlation."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .stats import InvalidInput


@dataclass(frozen=True)
class DetectionConfig:
    detection_window_minutes: int = 10
    rt_threshold_ms: float = 50.0
    traffic_correlation_threshold: float = 0.9
    moving_average_window: int = 10

    def __post_init__(self):
        if self.detection_window_minutes < 1 or self.moving_average_window < 1:
            raise InvalidInput("window sizes must be positive")
        if not 0.0 <= self.traffic_correlation_threshold <= 1.0:
            raise InvalidInput("traffic_correlation_threshold must lie in [0, 1]")


@dataclass(frozen=True)
class EngineConfig:
    detection: DetectionConfig = field(default_factory=DetectionConfig)
    pruning_threshold: float = 0.7
    call_window_minutes: int = 30
    metric_window_minutes: int = 60
    rt_model_path: str | None = None
    ec_model_path: str | None = None
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.call_window_minutes < 1 or self.metric_window_minutes < 1:
            raise InvalidInput("window sizes must be positive")
        if self.detection.detection_window_minutes > self.metric_window_minutes:
            raise InvalidInput("detection window longer than metric window")
        if not -1.0 <= self.pruning_threshold <= 1.0:
            raise InvalidInput("pruning_threshold must lie in [-1, 1]")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EngineConfig":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidInput(f"unknown engine config keys: {sorted(unknown)}")
        det = d.pop("detection", {}) or {}
        det_known = {f.name for f in fields(DetectionConfig)}
        if set(det) - det_known:
            raise InvalidInput(f"unknown detection config keys: {sorted(set(det) - det_known)}")
        return cls(detection=DetectionConfig(**det), **d)

    def replace(self, **changes) -> "EngineConfig":
        d = self.to_dict()
        det = dict(d.pop("detection"))
        for k in list(changes):
            if k in {f.name for f in fields(DetectionConfig)}:
                det[k] = changes.pop(k)
        d.update(changes)
        d["detection"] = det
        return EngineConfig.from_dict(d)

    @classmethod
    def load(cls, path: str | Path) -> "EngineConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))
