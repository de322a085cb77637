"""Fault injection with hop-by-hop propagation.

A fault deforms its root edge from the onset minute.  Performance and
reliability faults then spread to the callers' incoming edges, traffic
faults to the callees' outgoing edges; each hop scales the deviation by
``attenuation`` and delays it by ``lag_minutes``.  Entry services touched by
the spread see their business metric drop.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from ..detection import AnomalyType
from ..stats import InvalidInput
from ..store import BLOCK, EdgeKey, MetricStore
from .topology import Topology

# added error rate per unit of magnitude above 1 for reliability faults
EC_RATE_PER_UNIT = 0.05
# business drop for a slow dependency: PERF_DIP * (1 - 1/multiplier)
PERF_DIP = 0.5


@dataclass(frozen=True)
class FaultSpec:
    root_service: str
    root_edge: EdgeKey
    anomaly_type: AnomalyType
    onset_minute: int
    magnitude: float
    attenuation: float = 0.8
    lag_minutes: int = 0
    max_hops: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "root_edge", EdgeKey(*self.root_edge))
        object.__setattr__(self, "anomaly_type", AnomalyType(self.anomaly_type))
        if not 0.0 < self.attenuation <= 1.0:
            raise InvalidInput("attenuation must lie in (0, 1]")
        if self.lag_minutes < 0:
            raise InvalidInput("lag_minutes must be >= 0")
        if self.magnitude < 0:
            raise InvalidInput("magnitude must be >= 0")
        side = self.root_edge.caller if self.anomaly_type is AnomalyType.TRAFFIC else self.root_edge.callee
        if side != self.root_service:
            raise InvalidInput(
                f"root edge {self.root_edge} orientation inconsistent with a "
                f"{self.anomaly_type.value} fault at {self.root_service}"
            )

    def to_dict(self) -> dict:
        return {
            "root_service": self.root_service,
            "root_edge": list(self.root_edge),
            "anomaly_type": self.anomaly_type.value,
            "onset_minute": self.onset_minute,
            "magnitude": self.magnitude,
            "attenuation": self.attenuation,
            "lag_minutes": self.lag_minutes,
            "max_hops": self.max_hops,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FaultSpec":
        return cls(
            d["root_service"],
            EdgeKey(*d["root_edge"]),
            AnomalyType(d["anomaly_type"]),
            int(d["onset_minute"]),
            float(d["magnitude"]),
            float(d.get("attenuation", 0.8)),
            int(d.get("lag_minutes", 0)),
            d.get("max_hops"),
        )


@dataclass(frozen=True)
class GroundTruth:
    incident_minute: int
    initial_service: str
    root_service: str
    anomaly_type: AnomalyType

    def to_dict(self) -> dict:
        return {
            "incident_minute": self.incident_minute,
            "initial_service": self.initial_service,
            "root_service": self.root_service,
            "anomaly_type": self.anomaly_type.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruth":
        return cls(int(d["incident_minute"]), d["initial_service"], d["root_service"], AnomalyType(d["anomaly_type"]))


def propagation_hops(topology: Topology, spec: FaultSpec) -> dict[EdgeKey, int]:
    """Hop distance of every edge the fault reaches (root edge = 0)."""
    if spec.root_edge not in set(topology.edges):
        raise InvalidInput(f"root edge {spec.root_edge} not in topology")
    traffic = spec.anomaly_type is AnomalyType.TRAFFIC
    hops = {spec.root_edge: 0}
    todo = deque([spec.root_edge])
    while todo:
        e = todo.popleft()
        h = hops[e]
        if spec.max_hops is not None and h >= spec.max_hops:
            continue
        nxt = topology.out_edges(e.callee) if traffic else topology.in_edges(e.caller)
        for f in nxt:
            if f not in hops:
                hops[f] = h + 1
                todo.append(f)
    return hops


def reached_entries(topology: Topology, spec: FaultSpec, hops: dict[EdgeKey, int]) -> dict[str, int]:
    """Entry services whose own calls carry the fault, with the hop at which
    they are hit."""
    entries = set(topology.entry_services)
    out: dict[str, int] = {}
    for e, h in hops.items():
        s = e.callee if spec.anomaly_type is AnomalyType.TRAFFIC else e.caller
        if s in entries and (s not in out or h < out[s]):
            out[s] = h
    return out


def _multiplier(spec: FaultSpec, h: int) -> float:
    return 1.0 + (spec.magnitude - 1.0) * spec.attenuation ** h


def _error_rate(spec: FaultSpec, h: int) -> float:
    return min(1.0, max(0.0, EC_RATE_PER_UNIT * (spec.magnitude - 1.0) * spec.attenuation ** h))


def _rows_from(store: MetricStore, edge: EdgeKey, start: int):
    """Yield (block array copy, row slice) for every stored minute >= start."""
    for b in store.call_blocks(edge):
        if (b + 1) * BLOCK <= start:
            continue
        block = store._mutable_call_block(edge, b)
        lo = max(0, start - b * BLOCK)
        yield block, slice(lo, BLOCK)


def inject_fault(store: MetricStore, topology: Topology, spec: FaultSpec,
                 detect_delay: int = 6) -> tuple[MetricStore, GroundTruth]:
    """Deformed copy of ``store`` plus the fault's ground truth.

    The incident is declared ``detect_delay`` minutes after the fault
    reaches the first entry service.
    """
    hops = propagation_hops(topology, spec)
    entries = reached_entries(topology, spec, hops)
    if not entries:
        raise InvalidInput(f"fault at {spec.root_edge} cannot reach any entry service")
    initial = min(entries, key=lambda s: (entries[s], s))
    truth = GroundTruth(
        spec.onset_minute + entries[initial] * spec.lag_minutes + detect_delay,
        initial,
        spec.root_service,
        spec.anomaly_type,
    )

    out = store.copy()
    t = spec.anomaly_type
    metric_name = topology.business_metric
    # inbound requests of affected entries before deformation (traffic only)
    before = {}
    if t is AnomalyType.TRAFFIC:
        for s in entries:
            before[s] = _inbound_requests(out, topology, s, metric_name)

    for edge, h in sorted(hops.items(), key=lambda kv: (kv[1], kv[0])):
        start = spec.onset_minute + h * spec.lag_minutes
        for block, rows in _rows_from(out, edge, start):
            if t is AnomalyType.PERFORMANCE:
                block[rows, 0] *= _multiplier(spec, h)
            elif t is AnomalyType.RELIABILITY:
                req = block[rows, 3]
                block[rows, 1] = np.minimum(req, block[rows, 1] + _error_rate(spec, h) * req)
            else:
                m = max(0.0, _multiplier(spec, h))
                block[rows, 2] *= m
                block[rows, 3] = block[rows, 2] * 60.0
                block[rows, 1] = np.minimum(block[rows, 1] * m, block[rows, 3])

    for s, h in entries.items():
        key = (s, metric_name)
        if not out.has_business(s, metric_name):
            continue
        if t is AnomalyType.TRAFFIC:
            after = _inbound_requests(out, topology, s, metric_name)
            for b, old in before[s].items():
                new = after[b]
                ratio = np.divide(new, old, out=np.ones_like(new), where=old > 0)
                if not np.all(ratio == 1.0):
                    out._mutable_business_block(key, b)[:] *= ratio
            continue
        # worst deformed call made by the entry service drives its dip
        dip_edges = [(e, hh) for e, hh in hops.items() if e.caller == s]
        for e, hh in dip_edges:
            if t is AnomalyType.PERFORMANCE:
                dip = PERF_DIP * (1.0 - 1.0 / max(_multiplier(spec, hh), 1e-9))
            else:
                dip = _error_rate(spec, hh)
            if dip == 0.0:
                continue
            start = spec.onset_minute + hh * spec.lag_minutes
            for b in out.business_blocks(key):
                if (b + 1) * BLOCK <= start:
                    continue
                block = out._mutable_business_block(key, b)
                block[max(0, start - b * BLOCK):] *= 1.0 - min(dip, 1.0)
    return out, truth


def _inbound_requests(store: MetricStore, topology: Topology, service: str, metric_name: str) -> dict[int, np.ndarray]:
    feeding = topology.in_edges(service) or topology.out_edges(service)
    sums = {}
    for b in store.business_blocks((service, metric_name)):
        total = np.zeros(BLOCK)
        for e in feeding:
            blk = store._calls.get(e, {}).get(b)
            if blk is not None:
                total += np.nan_to_num(blk[:, 3])
        sums[b] = total
    return sums


def business_impact(base: MetricStore, faulted: MetricStore, truth: GroundTruth, metric_name: str,
                    minutes: int) -> float:
    """Relative business change at the initial service over the last
    ``minutes`` before the incident (positive for drops and surges alike)."""
    args = (truth.initial_service, metric_name, truth.incident_minute, minutes)
    before = float(base.query_business(*args).values.mean())
    after = float(faulted.query_business(*args).values.mean())
    if before == 0.0:
        return 0.0
    return abs(1.0 - after / before)
