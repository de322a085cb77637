"""Labelled detector cases cut from simulated fault episodes.

Each episode is a windowed baseline with one injected fault.  Every edge
yields one case; its label comes from the injection itself: an edge whose
metric the fault deformed visibly inside the detection window is anomalous,
an untouched edge is normal.  Edges the fault grazed too lightly or too late
to see are left out rather than guessed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..config import DetectionConfig
from ..detection import AnomalyType, StoreProvider, extract_ec_features, extract_rt_features
from ..stats import InvalidInput
from ..store import MetricKind
from .baseline import DAY, WEEK, generate_baseline, incident_hours
from .faults import _error_rate, _multiplier, business_impact, inject_fault, propagation_hops
from .scenarios import LOOKBACK, ScenarioPreset, get_preset, plan_fault
from .topology import Topology, generate_topology

# smallest per-edge effect that counts as a labelled anomaly
MIN_RT_CHANGE = 0.3
MIN_ERROR_RATE = 0.02
MIN_QPS_CHANGE = 0.2
MIN_VISIBLE_MINUTES = 3

# incident days for the two splits; read windows reach back a week plus an
# hour, so these ranges never share a minute
TRAIN_DAYS = (8, 14)
HELDOUT_DAYS = (23, 29)


@dataclass
class LabelledCases:
    detector: AnomalyType
    X: np.ndarray
    y: np.ndarray
    spans: list[tuple[int, int]] = field(default_factory=list)  # minutes read, [start, end)

    def __len__(self):
        return len(self.y)

    @property
    def ratio(self) -> tuple[int, int]:
        """(anomalous, normal) counts."""
        return int(self.y.sum()), int((~self.y).sum())

    def to_dict(self) -> dict:
        return {
            "detector": self.detector.value,
            "X": self.X.tolist(),
            "y": self.y.astype(int).tolist(),
            "spans": [list(s) for s in self.spans],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LabelledCases":
        X = np.asarray(d["X"], dtype=float)
        return cls(AnomalyType(d["detector"]), X, np.asarray(d["y"], dtype=bool),
                   [tuple(s) for s in d.get("spans", [])])

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "LabelledCases":
        return cls.from_dict(json.loads(Path(path).read_text()))


def read_spans(incident_minute: int) -> list[tuple[int, int]]:
    return [(incident_minute - off - LOOKBACK, incident_minute - off) for off in (0, DAY, WEEK)]


def spans_overlap(a: list[tuple[int, int]], b: list[tuple[int, int]]) -> bool:
    """True if any half-open interval of ``a`` intersects one of ``b``."""
    events = sorted([(s, e, 0) for s, e in a] + [(s, e, 1) for s, e in b])
    last_end = [-np.inf, -np.inf]
    for s, e, side in events:
        if s < last_end[1 - side]:
            return True
        last_end[side] = max(last_end[side], e)
    return False


def _label(spec, hop: int, incident_minute: int) -> bool | None:
    """True anomalous, None when the deformation is too faint to label."""
    visible = incident_minute - (spec.onset_minute + hop * spec.lag_minutes)
    if visible < MIN_VISIBLE_MINUTES:
        return None
    t = spec.anomaly_type
    if t is AnomalyType.PERFORMANCE:
        strong = _multiplier(spec, hop) - 1.0 >= MIN_RT_CHANGE
    elif t is AnomalyType.RELIABILITY:
        strong = _error_rate(spec, hop) >= MIN_ERROR_RATE
    else:
        strong = abs(_multiplier(spec, hop) - 1.0) >= MIN_QPS_CHANGE
    return True if strong else None


@dataclass
class TrafficCase:
    qps: np.ndarray
    business: np.ndarray


def _episode(topology: Topology, preset: ScenarioPreset, t: AnomalyType, seed: int, days: tuple[int, int],
             config: DetectionConfig, per_episode: int):
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xC0, list(AnomalyType).index(t)]))
    spec, delay, T = plan_fault(topology, preset, t, rng, *days)
    base = generate_baseline(topology, T // DAY + 1, seed, preset.baseline, incident_hours(T, LOOKBACK))
    store, truth = inject_fault(base, topology, spec, delay)
    if business_impact(base, store, truth, topology.business_metric, delay) < preset.min_business_impact:
        return []  # not an availability issue; nobody would localize it
    hops = propagation_hops(topology, spec)
    provider = StoreProvider(store)
    business = store.query_business(truth.initial_service, topology.business_metric, T, 60).values
    anomalous, normal = [], []
    for e in topology.edges:
        label = _label(spec, hops[e], T) if e in hops else False
        if label is None:
            continue
        (anomalous if label else normal).append(e)
    # cap per episode so many episodes, not a few large ones, shape the corpus
    pick = lambda edges: [edges[i] for i in sorted(rng.permutation(len(edges))[:per_episode])]  # noqa: E731
    out = []
    for label, edges in ((True, pick(anomalous)), (False, pick(normal))):
        for e in edges:
            if t is AnomalyType.PERFORMANCE:
                vec = extract_rt_features(provider, e, T, config).vector
            elif t is AnomalyType.RELIABILITY:
                vec = extract_ec_features(provider, e, T, config).vector
            else:
                vec = TrafficCase(store.query_window(e, MetricKind.QPS, T, 60).values, business)
            out.append((vec, label, T))
    return out


def generate_training_corpus(
    topology: Topology,
    n_normal: int,
    n_anomalous: int,
    seed: int,
    detector: AnomalyType | str = AnomalyType.PERFORMANCE,
    split: str = "train",
    preset: ScenarioPreset | str = "noisy",
    config: DetectionConfig | None = None,
    per_episode: int = 6,
    max_episodes: int = 5000,
):
    """Exactly ``n_normal`` normal and ``n_anomalous`` anomalous cases.

    RT and EC cases are feature vectors; traffic cases are raw
    ``(qps, business)`` windows since that detector is not trained.
    ``split`` selects disjoint day ranges for training and held-out data.
    """
    t = AnomalyType(detector)
    if split not in ("train", "heldout"):
        raise InvalidInput("split must be 'train' or 'heldout'")
    preset = get_preset(preset)
    config = config or DetectionConfig()
    days = TRAIN_DAYS if split == "train" else HELDOUT_DAYS
    pos, neg = [], []
    ep = 0
    base_seed = seed * 100_003 + (0 if split == "train" else 50_000)
    while (len(pos) < n_anomalous or len(neg) < n_normal) and ep < max_episodes:
        for vec, label, T in _episode(topology, preset, t, base_seed + ep, days, config, per_episode):
            (pos if label else neg).append((vec, T))
        ep += 1
    if len(pos) < n_anomalous or len(neg) < n_normal:
        raise InvalidInput("episode budget exhausted before the corpus was filled")
    rows = pos[:n_anomalous] + neg[:n_normal]
    y = np.array([True] * n_anomalous + [False] * n_normal)
    spans = [s for _, T in rows for s in read_spans(T)]
    if t is AnomalyType.TRAFFIC:
        return [r[0] for r in rows], y, spans
    X = np.array([r[0] for r in rows], dtype=float).reshape(len(rows), -1)
    return LabelledCases(t, X, y, spans)


@dataclass(frozen=True)
class CorpusConfig:
    n_services: int = 30
    topology_seed: int = 7
    rt_train_normal: int = 2000
    rt_heldout: tuple[int, int] = (300, 300)      # (anomalous, normal)
    ec_train: tuple[int, int] = (250, 750)        # 1:3
    ec_heldout: tuple[int, int] = (250, 150)      # 5:3
    traffic_heldout: tuple[int, int] = (300, 300)
    seed: int = 0


@dataclass
class Corpus:
    topology: Topology
    rt_train: LabelledCases
    rt_heldout: LabelledCases
    ec_train: LabelledCases
    ec_heldout: LabelledCases
    traffic_heldout: tuple[list, np.ndarray, list]

    def save(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        self.topology.save(out / "topology.json")
        for name in ("rt_train", "rt_heldout", "ec_train", "ec_heldout"):
            getattr(self, name).save(out / f"{name}.json")
        cases, y, spans = self.traffic_heldout
        (out / "traffic_heldout.json").write_text(json.dumps({
            "qps": [c.qps.tolist() for c in cases],
            "business": [c.business.tolist() for c in cases],
            "y": y.astype(int).tolist(),
            "spans": [list(s) for s in spans],
        }))

    @classmethod
    def load(cls, out_dir) -> "Corpus":
        d = Path(out_dir)
        if not (d / "rt_train.json").exists():
            raise FileNotFoundError(f"no corpus in {d}")
        topo = Topology.from_dict(json.loads((d / "topology.json").read_text()))
        tr = json.loads((d / "traffic_heldout.json").read_text())
        cases = [TrafficCase(np.asarray(q), np.asarray(b)) for q, b in zip(tr["qps"], tr["business"])]
        traffic = (cases, np.asarray(tr["y"], dtype=bool), [tuple(s) for s in tr["spans"]])
        return cls(topo, *(LabelledCases.load(d / f"{n}.json")
                           for n in ("rt_train", "rt_heldout", "ec_train", "ec_heldout")), traffic)


def default_corpus(cfg: CorpusConfig | None = None) -> Corpus:
    cfg = cfg or CorpusConfig()
    topo = generate_topology(cfg.n_services, seed=cfg.topology_seed)
    P, R, Q = AnomalyType.PERFORMANCE, AnomalyType.RELIABILITY, AnomalyType.TRAFFIC
    s = cfg.seed
    return Corpus(
        topo,
        generate_training_corpus(topo, cfg.rt_train_normal, 0, s, P, "train"),
        generate_training_corpus(topo, cfg.rt_heldout[1], cfg.rt_heldout[0], s, P, "heldout"),
        generate_training_corpus(topo, cfg.ec_train[1], cfg.ec_train[0], s, R, "train"),
        generate_training_corpus(topo, cfg.ec_heldout[1], cfg.ec_heldout[0], s, R, "heldout"),
        generate_training_corpus(topo, cfg.traffic_heldout[1], cfg.traffic_heldout[0], s, Q, "heldout"),
    )
