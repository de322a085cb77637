"""Fault-free metric streams with daily and weekly periodicity.

Random draws are made per hour block from ``SeedSequence([seed, block])``
so any subset of hours can be generated on its own and still match a full
run minute for minute.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Iterable

import numpy as np

from ..stats import InvalidInput
from ..store import BLOCK, MetricStore
from .topology import Topology

DAY = 1440
WEEK = 7 * DAY


@dataclass(frozen=True)
class BaselineParams:
    rt_noise: float = 0.05          # relative sigma of per-minute RT
    qps_noise: float = 0.03         # relative sigma of per-minute QPS
    rt_diurnal: float = 0.15
    qps_diurnal: float = 0.3
    weekly: float = 0.05
    ec_burst_prob: float = 0.03     # chance of a small error burst in a minute
    ec_burst_mean: float = 2.0
    business_noise: float = 0.01
    orders_per_request: float = 0.05
    rt_base_min: float = 5.0
    rt_base_max: float = 120.0
    qps_base_min: float = 20.0
    qps_base_max: float = 400.0

    @classmethod
    def noise_free(cls) -> "BaselineParams":
        return cls(rt_noise=0.0, qps_noise=0.0, rt_diurnal=0.0, qps_diurnal=0.0, weekly=0.0,
                   ec_burst_prob=0.0, business_noise=0.0)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "BaselineParams":
        known = {f.name for f in fields(cls)}
        if set(d) - known:
            raise InvalidInput(f"unknown baseline params: {sorted(set(d) - known)}")
        return cls(**d)


@dataclass
class _Profiles:
    rt_base: np.ndarray
    qps_base: np.ndarray
    phase: np.ndarray


def _profiles(topology: Topology, params: BaselineParams, seed: int) -> _Profiles:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5EED]))
    n = len(topology.edges)
    log_uniform = lambda lo, hi: np.exp(rng.uniform(np.log(lo), np.log(hi), n))  # noqa: E731
    rt_base = log_uniform(params.rt_base_min, params.rt_base_max)
    qps_base = log_uniform(params.qps_base_min, params.qps_base_max)
    phase = rng.normal(0.0, 0.1, n)
    return _Profiles(rt_base, qps_base, phase)


def _block(topology, prof: _Profiles, params: BaselineParams, seed: int, b: int):
    t = b * BLOCK + np.arange(BLOCK)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xB10C, b]))
    n = len(topology.edges)
    z_rt = rng.standard_normal((n, BLOCK))
    z_qps = rng.standard_normal((n, BLOCK))
    burst = rng.random((n, BLOCK))
    burst_size = rng.poisson(params.ec_burst_mean, (n, BLOCK)) + 1
    z_biz = rng.standard_normal((len(topology.entry_services), BLOCK))

    daily = np.sin(2 * np.pi * t[None, :] / DAY + prof.phase[:, None])
    weekly = 1.0 + params.weekly * np.sin(2 * np.pi * t / WEEK)[None, :]
    rt = prof.rt_base[:, None] * (1 + params.rt_diurnal * daily) * weekly * (1 + params.rt_noise * z_rt)
    rt = np.maximum(rt, 0.1 * prof.rt_base[:, None])
    qps = prof.qps_base[:, None] * (1 + params.qps_diurnal * daily) * weekly * (1 + params.qps_noise * z_qps)
    qps = np.maximum(qps, 0.0)
    req = qps * 60.0
    ec = np.where(burst < params.ec_burst_prob, burst_size, 0).astype(float)
    ec = np.minimum(ec, req)

    business = np.zeros((len(topology.entry_services), BLOCK))
    index = {e: i for i, e in enumerate(topology.edges)}
    for k, s in enumerate(topology.entry_services):
        feeding = topology.in_edges(s) or topology.out_edges(s)
        inbound = req[[index[e] for e in feeding]].sum(axis=0)
        business[k] = params.orders_per_request * inbound * (1 + params.business_noise * z_biz[k])
    return rt, ec, qps, req, business


def incident_hours(incident_minute: int, lookback: int = 71) -> list[int]:
    """Hour blocks a localization at ``incident_minute`` reads: the recent
    window plus the same clock window one day and one week earlier."""
    hours = set()
    for offset in (0, DAY, WEEK):
        end = incident_minute - offset
        start = end - lookback
        if start < 0:
            continue
        hours.update(range(start // BLOCK, (end - 1) // BLOCK + 1))
    return sorted(hours)


def generate_baseline(
    topology: Topology,
    days: int,
    seed: int,
    params: BaselineParams | None = None,
    hours: Iterable[int] | None = None,
) -> MetricStore:
    """Per-minute call and business metrics for ``days`` days.

    ``hours`` restricts output to the listed hour blocks.
    """
    if days < 8:
        raise InvalidInput("baseline needs at least 8 days so week-old comparison periods exist")
    params = params or BaselineParams()
    total = days * 24
    blocks = range(total) if hours is None else sorted(set(hours))
    if any(b < 0 or b >= total for b in blocks):
        raise InvalidInput("requested hour outside the generated span")
    prof = _profiles(topology, params, seed)
    store = MetricStore()
    for b in blocks:
        rt, ec, qps, req, business = _block(topology, prof, params, seed, b)
        for i, edge in enumerate(topology.edges):
            store.ingest_calls(edge, b * BLOCK, rt[i], ec[i], qps[i], req[i])
        for k, s in enumerate(topology.entry_services):
            store.ingest_business(s, topology.business_metric, b * BLOCK, business[k])
    return store
