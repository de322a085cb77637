"""In-memory minute-bucketed store for service-call and business metrics.

Edge metrics live in hour-aligned blocks (``numpy`` arrays of shape
``(60, 4)``, NaN where no record exists) so that both single-record ingest
and bulk loads from the simulator stay cheap.  Windows are half-open:
``query_window(..., end, length)`` covers minutes ``[end - length, end)``.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Union

import numpy as np

from .stats import InvalidInput, Series

BLOCK = 60

# column order inside a block
_RT, _EC, _QPS, _REQ = range(4)


class MetricKind(str, enum.Enum):
    RT = "RT"
    EC = "EC"
    QPS = "QPS"


_COLUMN = {MetricKind.RT: _RT, MetricKind.EC: _EC, MetricKind.QPS: _QPS}


class EdgeKey(NamedTuple):
    caller: str
    callee: str

    def __str__(self):
        return f"{self.caller}->{self.callee}"


def make_edge(caller: str, callee: str) -> EdgeKey:
    if not caller or not callee:
        raise InvalidInput("edge endpoints must be non-empty")
    if caller == callee:
        raise InvalidInput(f"self-loop {caller}->{callee}")
    return EdgeKey(caller, callee)


@dataclass(frozen=True)
class CallRecord:
    minute: int
    edge: EdgeKey
    rt_ms: float
    error_count: float
    qps: float
    request_count: float

    def validate(self):
        make_edge(*self.edge)
        for name in ("rt_ms", "error_count", "qps", "request_count"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise InvalidInput(f"{name} must be finite and >= 0, got {v}")
        if self.error_count > self.request_count:
            raise InvalidInput("error_count exceeds request_count")
        if not _requests_match(self.qps, self.request_count):
            raise InvalidInput(
                f"request_count {self.request_count} inconsistent with qps {self.qps} (x60, 1%)"
            )


@dataclass(frozen=True)
class BusinessRecord:
    minute: int
    service: str
    metric_name: str
    value: float

    def validate(self):
        if not self.service or not self.metric_name:
            raise InvalidInput("business record needs service and metric_name")
        if not math.isfinite(self.value):
            raise InvalidInput("business value must be finite")


Record = Union[CallRecord, BusinessRecord]


def _requests_match(qps, requests) -> bool:
    expected = qps * 60.0
    return abs(requests - expected) <= 0.01 * max(expected, requests) + 1e-9


def _blocks_for(start: int, end: int) -> range:
    return range(start // BLOCK, (end - 1) // BLOCK + 1)


class MetricStore:
    """Edge and business time series keyed by integer minute."""

    def __init__(self):
        self._calls: dict[EdgeKey, dict[int, np.ndarray]] = {}
        self._business: dict[tuple[str, str], dict[int, np.ndarray]] = {}
        self._first: int | None = None
        self.reads = 0

    def _seen(self, minute: int):
        if self._first is None or minute < self._first:
            self._first = minute

    # -- ingest ---------------------------------------------------------

    def ingest(self, record: Record) -> None:
        record.validate()
        m = int(record.minute)
        b, off = divmod(m, BLOCK)
        if isinstance(record, CallRecord):
            blocks = self._calls.setdefault(EdgeKey(*record.edge), {})
            block = blocks.get(b)
            if block is None:
                block = blocks[b] = np.full((BLOCK, 4), np.nan)
            block[off] = (record.rt_ms, record.error_count, record.qps, record.request_count)
            self._seen(m)
        else:
            blocks = self._business.setdefault((record.service, record.metric_name), {})
            block = blocks.get(b)
            if block is None:
                block = blocks[b] = np.full(BLOCK, np.nan)
            block[off] = record.value

    def ingest_calls(self, edge: EdgeKey, start_minute: int, rt, ec, qps, requests) -> None:
        """Bulk form of :meth:`ingest` for consecutive minutes of one edge."""
        edge = make_edge(*edge)
        cols = np.column_stack([np.asarray(c, dtype=float) for c in (rt, ec, qps, requests)])
        if not np.all(np.isfinite(cols)) or np.any(cols < 0):
            raise InvalidInput(f"{edge}: metric values must be finite and >= 0")
        if np.any(cols[:, _EC] > cols[:, _REQ]):
            raise InvalidInput(f"{edge}: error_count exceeds request_count")
        exp = cols[:, _QPS] * 60.0
        if np.any(np.abs(cols[:, _REQ] - exp) > 0.01 * np.maximum(exp, cols[:, _REQ]) + 1e-9):
            raise InvalidInput(f"{edge}: request_count inconsistent with qps")
        blocks = self._calls.setdefault(edge, {})
        self._write_rows(blocks, start_minute, cols, (BLOCK, 4))
        if len(cols):
            self._seen(int(start_minute))

    def ingest_business(self, service: str, metric_name: str, start_minute: int, values) -> None:
        vals = np.asarray(values, dtype=float)
        if not np.all(np.isfinite(vals)):
            raise InvalidInput("business values must be finite")
        blocks = self._business.setdefault((service, metric_name), {})
        self._write_rows(blocks, start_minute, vals, (BLOCK,))

    @staticmethod
    def _write_rows(blocks, start_minute, rows, shape):
        i = 0
        m = int(start_minute)
        n = len(rows)
        while i < n:
            b, off = divmod(m, BLOCK)
            take = min(BLOCK - off, n - i)
            block = blocks.get(b)
            if block is None:
                block = blocks[b] = np.full(shape, np.nan)
            block[off:off + take] = rows[i:i + take]
            i += take
            m += take

    # -- queries --------------------------------------------------------

    def _raw(self, blocks: dict[int, np.ndarray] | None, start: int, end: int, col=None) -> np.ndarray:
        out = np.full(end - start, np.nan)
        if not blocks:
            return out
        for b in _blocks_for(start, end):
            block = blocks.get(b)
            if block is None:
                continue
            lo = max(start, b * BLOCK)
            hi = min(end, (b + 1) * BLOCK)
            src = block[lo - b * BLOCK:hi - b * BLOCK]
            out[lo - start:hi - start] = src if col is None else src[:, col]
        return out

    def _last_before(self, blocks, minute: int, col=None) -> float:
        """Most recent observed value strictly before ``minute`` (NaN if none)."""
        if not blocks:
            return math.nan
        for b in sorted((k for k in blocks if k * BLOCK < minute), reverse=True):
            block = blocks[b]
            vals = block if col is None else block[:, col]
            upto = min(BLOCK, minute - b * BLOCK)
            seen = np.flatnonzero(~np.isnan(vals[:upto]))
            if seen.size:
                return float(vals[seen[-1]])
        return math.nan

    def query_window(self, edge: EdgeKey, kind: MetricKind, end_minute: int, length: int) -> Series:
        """Edge metric over ``[end_minute - length, end_minute)``.

        EC and QPS gaps are zero.  RT gaps carry the previous observation
        forward (zero when the edge has never been observed).
        """
        if length < 1:
            raise InvalidInput("length must be positive")
        self.reads += 1
        start = end_minute - length
        kind = MetricKind(kind)
        blocks = self._calls.get(EdgeKey(*edge))
        col = _COLUMN[kind]
        vals = self._raw(blocks, start, end_minute, col)
        if kind is MetricKind.RT:
            prior = self._last_before(blocks, start, col) if vals.size and math.isnan(vals[0]) else math.nan
            vals = _forward_fill(vals, prior)
        else:
            vals = np.nan_to_num(vals, nan=0.0)
        return Series(vals, start)

    def query_requests(self, edge: EdgeKey, end_minute: int, length: int) -> Series:
        """Per-minute request counts; gaps are zero."""
        if length < 1:
            raise InvalidInput("length must be positive")
        self.reads += 1
        start = end_minute - length
        vals = self._raw(self._calls.get(EdgeKey(*edge)), start, end_minute, _REQ)
        return Series(np.nan_to_num(vals, nan=0.0), start)

    def query_business(self, service: str, metric_name: str, end_minute: int, length: int) -> Series:
        """Business metric window; gaps carry the previous value forward."""
        if length < 1:
            raise InvalidInput("length must be positive")
        self.reads += 1
        start = end_minute - length
        blocks = self._business.get((service, metric_name))
        vals = self._raw(blocks, start, end_minute)
        prior = self._last_before(blocks, start) if vals.size and math.isnan(vals[0]) else math.nan
        return Series(_forward_fill(vals, prior), start)

    def edges_active(self, window_end: int, length: int) -> set[EdgeKey]:
        """Edges with at least one minute of ``request_count > 0`` in the window."""
        start = window_end - length
        active = set()
        for edge, blocks in self._calls.items():
            for b in _blocks_for(start, window_end):
                block = blocks.get(b)
                if block is None:
                    continue
                lo = max(start, b * BLOCK) - b * BLOCK
                hi = min(window_end, (b + 1) * BLOCK) - b * BLOCK
                if np.any(block[lo:hi, _REQ] > 0):
                    active.add(edge)
                    break
        return active

    def has_business(self, service: str, metric_name: str) -> bool:
        return (service, metric_name) in self._business

    def first_minute(self) -> int | None:
        """Earliest minute holding any call record."""
        return self._first

    @property
    def edges(self) -> list[EdgeKey]:
        return sorted(self._calls)

    # -- copy-on-write support for fault injection ------------------------

    def copy(self) -> "MetricStore":
        """Shallow copy: block arrays are shared until replaced via ``_mutable_*``."""
        other = MetricStore()
        other._calls = {e: dict(bl) for e, bl in self._calls.items()}
        other._business = {k: dict(bl) for k, bl in self._business.items()}
        other._first = self._first
        return other

    def _mutable_call_block(self, edge: EdgeKey, b: int) -> np.ndarray | None:
        blocks = self._calls.get(edge)
        if not blocks or b not in blocks:
            return None
        blocks[b] = blocks[b].copy()
        return blocks[b]

    def _mutable_business_block(self, key: tuple[str, str], b: int) -> np.ndarray | None:
        blocks = self._business.get(key)
        if not blocks or b not in blocks:
            return None
        blocks[b] = blocks[b].copy()
        return blocks[b]

    def call_blocks(self, edge: EdgeKey) -> list[int]:
        return sorted(self._calls.get(edge, {}))

    def business_keys(self) -> list[tuple[str, str]]:
        return sorted(self._business)

    def business_blocks(self, key: tuple[str, str]) -> list[int]:
        return sorted(self._business.get(key, {}))

    # -- iteration and JSONL ---------------------------------------------

    def records(self) -> Iterator[Record]:
        """Every stored record, calls then business, each in (key, minute) order."""
        for edge in sorted(self._calls):
            blocks = self._calls[edge]
            for b in sorted(blocks):
                block = blocks[b]
                for off in np.flatnonzero(~np.isnan(block[:, _REQ])):
                    rt, ec, qps, req = (float(v) for v in block[off])
                    yield CallRecord(b * BLOCK + int(off), edge, rt, ec, qps, req)
        for key in sorted(self._business):
            blocks = self._business[key]
            for b in sorted(blocks):
                block = blocks[b]
                for off in np.flatnonzero(~np.isnan(block)):
                    yield BusinessRecord(b * BLOCK + int(off), key[0], key[1], float(block[off]))

    def save_jsonl(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            for rec in self.records():
                fh.write(json.dumps(record_to_dict(rec)) + "\n")

    @classmethod
    def load_jsonl(cls, path: str | Path) -> "MetricStore":
        store = cls()
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    store.ingest(record_from_dict(json.loads(line)))
                except (ValueError, KeyError, TypeError) as exc:
                    raise InvalidInput(f"{path}:{lineno}: {exc}") from exc
        return store


def _forward_fill(vals: np.ndarray, prior: float) -> np.ndarray:
    missing = np.isnan(vals)
    if not missing.any():
        return vals.copy()
    filled = np.concatenate([[0.0 if math.isnan(prior) else prior], vals])
    idx = np.where(np.concatenate([[False], missing]), 0, np.arange(filled.size))
    np.maximum.accumulate(idx, out=idx)
    return filled[idx][1:]


def record_to_dict(rec: Record) -> dict:
    if isinstance(rec, CallRecord):
        return {
            "kind": "call",
            "minute": rec.minute,
            "caller": rec.edge.caller,
            "callee": rec.edge.callee,
            "rt_ms": rec.rt_ms,
            "error_count": rec.error_count,
            "qps": rec.qps,
            "request_count": rec.request_count,
        }
    return {
        "kind": "business",
        "minute": rec.minute,
        "service": rec.service,
        "metric_name": rec.metric_name,
        "value": rec.value,
    }


def record_from_dict(d: dict) -> Record:
    kind = d.get("kind")
    if kind == "call":
        return CallRecord(
            int(d["minute"]),
            EdgeKey(str(d["caller"]), str(d["callee"])),
            float(d["rt_ms"]),
            float(d["error_count"]),
            float(d["qps"]),
            float(d["request_count"]),
        )
    if kind == "business":
        return BusinessRecord(int(d["minute"]), str(d["service"]), str(d["metric_name"]), float(d["value"]))
    raise InvalidInput(f"unknown record kind {kind!r}")


def load_records(records: Iterable[Record]) -> MetricStore:
    store = MetricStore()
    for rec in records:
        store.ingest(rec)
    return store
