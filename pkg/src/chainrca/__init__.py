"""Root-cause localization for availability issues in microservice systems.

Given per-minute call metrics and the service where a business metric
dropped, the engine detects anomalous calls, follows anomaly propagation
chains over the service call graph and ranks the services where the
chains end.
"""

from .config import DetectionConfig, EngineConfig
from .detection import AnomalyType
from .engine import Localization, localize
from .stats import InvalidInput, Series, moving_average, pearson, three_sigma_outliers
from .store import BusinessRecord, CallRecord, EdgeKey, MetricKind, MetricStore

__version__ = "0.1.0"

__all__ = [
    "AnomalyType",
    "BusinessRecord",
    "CallRecord",
    "DetectionConfig",
    "EdgeKey",
    "EngineConfig",
    "InvalidInput",
    "Localization",
    "MetricKind",
    "MetricStore",
    "Series",
    "localize",
    "moving_average",
    "pearson",
    "three_sigma_outliers",
]
