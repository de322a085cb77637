"""Scenario presets and single-fault incident generation.

Presets bundle noise levels with fault magnitudes and root placement, so
the evaluation suites differ only in configuration.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path

import numpy as np

from ..detection import AnomalyType
from ..stats import InvalidInput
from ..store import BLOCK, EdgeKey, MetricStore
from .baseline import DAY, WEEK, BaselineParams, generate_baseline, incident_hours
from .faults import FaultSpec, GroundTruth, business_impact, inject_fault, propagation_hops
from .topology import Topology, example_topology, generate_topology

TYPES = (AnomalyType.PERFORMANCE, AnomalyType.RELIABILITY, AnomalyType.TRAFFIC)
LOOKBACK = 71  # minutes read before an incident: detection window, hour, one spare


@dataclass(frozen=True)
class ScenarioPreset:
    name: str = "noisy"
    n_services: int = 60
    avg_out_degree: float = 2.5
    mid_layers: int | None = None
    baseline: BaselineParams = field(default_factory=BaselineParams)
    performance_magnitude: tuple[float, float] = (3.0, 10.0)
    reliability_magnitude: tuple[float, float] = (4.0, 12.0)
    traffic_drop: tuple[float, float] = (0.1, 0.4)
    traffic_surge: tuple[float, float] = (2.5, 4.0)
    traffic_surge_prob: float = 0.3
    attenuation: float = 0.8
    lag_choices: tuple[int, ...] = (0, 1)
    detect_delay: tuple[int, int] = (5, 8)
    max_root_depth: int = 4
    terminal_roots: bool = False   # roots at leaves (RT/EC) or proxies (QPS)
    distractors: int = 0           # single-minute spikes hung off the chain
    distractor_depth: int = 2
    first_day: int = 8
    last_day: int = 14
    min_business_impact: float = 0.2  # faults the business monitor would not notice are redrawn

    def to_dict(self) -> dict:
        d = asdict(self)
        d["baseline"] = self.baseline.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioPreset":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        if set(d) - known:
            raise InvalidInput(f"unknown preset keys: {sorted(set(d) - known)}")
        if "baseline" in d:
            d["baseline"] = BaselineParams.from_dict(d["baseline"])
        for k in ("performance_magnitude", "reliability_magnitude", "traffic_drop", "traffic_surge",
                  "lag_choices", "detect_delay"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)


PRESETS = {
    "noise_free": ScenarioPreset(name="noise_free", baseline=BaselineParams.noise_free(), lag_choices=(0,)),
    "noisy": ScenarioPreset(name="noisy"),
    "sweep": ScenarioPreset(name="sweep", lag_choices=(0,), terminal_roots=True, distractors=4,
                            distractor_depth=4),
}


def get_preset(name_or_dict) -> ScenarioPreset:
    if isinstance(name_or_dict, ScenarioPreset):
        return name_or_dict
    if isinstance(name_or_dict, str):
        if name_or_dict not in PRESETS:
            raise InvalidInput(f"unknown preset {name_or_dict!r}; choose from {sorted(PRESETS)}")
        return PRESETS[name_or_dict]
    d = dict(name_or_dict)
    base = PRESETS.get(d.pop("extends", "noisy"))
    merged = base.to_dict()
    merged.update(d)
    return ScenarioPreset.from_dict(merged)


@dataclass
class Incident:
    seed: int
    preset: str
    topology: Topology
    store: MetricStore
    truth: GroundTruth
    faults: list[FaultSpec]
    distractor_edges: list[EdgeKey] = field(default_factory=list)


def _bfs(start: list[str], step) -> dict[str, int]:
    dist = {s: 0 for s in start}
    todo = deque(start)
    while todo:
        s = todo.popleft()
        for n in step(s):
            if n not in dist:
                dist[n] = dist[s] + 1
                todo.append(n)
    return dist


def root_candidates(topology: Topology, anomaly_type: AnomalyType, max_depth: int,
                    terminal: bool = False) -> list[tuple[EdgeKey, int]]:
    """Root edges that reach an entry service within ``max_depth`` hops and
    sit on no cycle, paired with that hop count."""
    entries = topology.entry_services
    entry_layer = min((topology.layers.get(s, 0) for s in entries), default=0)
    comp = topology.components()
    out = []
    if anomaly_type is AnomalyType.TRAFFIC:
        # distance from a callee down to the nearest entry
        to_entry = _bfs(list(entries), lambda x: [e.caller for e in topology.in_edges(x)])
        for e in topology.edges:
            r, c = e
            if topology.layers.get(r, 0) >= entry_layer or c not in to_entry:
                continue
            if terminal and topology.in_edges(r):
                continue
            h = to_entry[c]
            if h <= max_depth and comp[r] != comp[c]:
                out.append((e, h))
    else:
        from_entry = _bfs(list(entries), lambda x: [e.callee for e in topology.out_edges(x)])
        for e in topology.edges:
            p, r = e
            if topology.layers.get(r, 0) <= entry_layer or p not in from_entry:
                continue
            if terminal and topology.out_edges(r):
                continue
            h = from_entry[p]
            if h <= max_depth and comp[p] != comp[r]:
                out.append((e, h))
    return out


def _magnitude(preset: ScenarioPreset, t: AnomalyType, rng: np.random.Generator) -> float:
    if t is AnomalyType.PERFORMANCE:
        return float(rng.uniform(*preset.performance_magnitude))
    if t is AnomalyType.RELIABILITY:
        return float(rng.uniform(*preset.reliability_magnitude))
    if rng.random() < preset.traffic_surge_prob:
        return float(rng.uniform(*preset.traffic_surge))
    return float(rng.uniform(*preset.traffic_drop))


def plan_fault(topology: Topology, preset: ScenarioPreset, anomaly_type: AnomalyType, rng: np.random.Generator,
               first_day: int | None = None, last_day: int | None = None) -> tuple[FaultSpec, int, int]:
    """Random fault, detection delay and incident minute for ``topology``.

    The incident falls on a day in ``[first_day, last_day]``.
    """
    t = AnomalyType(anomaly_type)
    roots = root_candidates(topology, t, preset.max_root_depth, preset.terminal_roots)
    if not roots and preset.terminal_roots:
        roots = root_candidates(topology, t, preset.max_root_depth, False)
    if not roots:
        raise InvalidInput(f"topology has no admissible {t.value} root edge")
    edge, hop = roots[int(rng.integers(len(roots)))]
    delay = int(rng.integers(preset.detect_delay[0], preset.detect_delay[1] + 1))
    lag = 0
    if t is not AnomalyType.TRAFFIC:
        lag = int(preset.lag_choices[int(rng.integers(len(preset.lag_choices)))])
        if hop * lag + delay > 10:
            lag = 0
    lo = preset.first_day if first_day is None else first_day
    hi = preset.last_day if last_day is None else last_day
    day = int(rng.integers(lo, hi + 1))
    minute = day * DAY + int(rng.integers(0, DAY))
    minute = max(minute, WEEK + LOOKBACK + BLOCK)
    onset = minute - hop * lag - delay
    root = edge.caller if t is AnomalyType.TRAFFIC else edge.callee
    spec = FaultSpec(root, edge, t, onset, _magnitude(preset, t, rng), preset.attenuation, lag)
    return spec, delay, minute


def _deformed_callers(topology: Topology, spec: FaultSpec, initial: str) -> list[str]:
    """Chain services between the initial service and the root, for RT/EC faults."""
    hops = propagation_hops(topology, spec)
    callers = {e.caller for e in hops}
    reach = _bfs([initial], lambda x: [e.callee for e in topology.out_edges(x) if e in hops])
    return sorted(s for s in reach if s in callers and s not in (initial, spec.root_service))


def add_distractors(store: MetricStore, topology: Topology, spec: FaultSpec, truth: GroundTruth,
                    preset: ScenarioPreset, rng: np.random.Generator) -> list[EdgeKey]:
    """Hang transient blips off up to ``preset.distractors`` intermediate
    chain services.

    A blip hits every undeformed call below the chosen service, down to
    ``preset.distractor_depth`` levels, for the last one or two minutes
    before the incident, like a hiccup in a shared downstream subsystem.
    It looks anomalous but does not follow the chain's trend.
    """
    if preset.distractors <= 0 or spec.anomaly_type is AnomalyType.TRAFFIC:
        return []
    hops = propagation_hops(topology, spec)
    inside = {e.caller for e in hops} | {spec.root_service, truth.initial_service}
    starts = _deformed_callers(topology, spec, truth.initial_service)
    spiked: list[EdgeKey] = []
    chosen = [starts[i] for i in sorted(rng.permutation(len(starts))[:preset.distractors])]
    for node in chosen:
        minutes = int(rng.integers(1, 3))
        frontier = [e for e in topology.out_edges(node) if e not in hops and e.callee not in inside]
        seen = {e.callee for e in frontier}
        for _ in range(preset.distractor_depth):
            nxt = []
            for e in frontier:
                if e in spiked:
                    continue
                _blip(store, e, truth.incident_minute, minutes, spec.anomaly_type)
                spiked.append(e)
                for f in topology.out_edges(e.callee):
                    if f not in hops and f.callee not in inside and f.callee not in seen:
                        seen.add(f.callee)
                        nxt.append(f)
            frontier = nxt
    return spiked


def _blip(store: MetricStore, edge: EdgeKey, incident_minute: int, minutes: int, t: AnomalyType):
    for m in range(incident_minute - minutes, incident_minute):
        b, off = divmod(m, BLOCK)
        block = store._mutable_call_block(edge, b)
        if block is None:
            continue
        if t is AnomalyType.PERFORMANCE:
            block[off, 0] *= 10.0
        else:
            block[off, 1] = max(block[off, 1], 0.5 * block[off, 3])


def make_incident(preset: ScenarioPreset | str, seed: int, anomaly_type: AnomalyType | str,
                  n_services: int | None = None, max_attempts: int = 50) -> Incident:
    """One single-fault incident with windowed history around it.

    Faults are redrawn until one dips the initial service's business metric
    by at least ``preset.min_business_impact``.
    """
    preset = get_preset(preset)
    t = AnomalyType(anomaly_type)
    n = preset.n_services if n_services is None else n_services
    topo = None
    for k in range(20):
        topo = generate_topology(n, preset.avg_out_degree, seed=seed * 1000 + k, mid_layers=preset.mid_layers)
        if root_candidates(topo, t, preset.max_root_depth, False):
            break
    else:
        raise InvalidInput(f"no admissible {t.value} root for seed {seed}")
    for attempt in range(max_attempts):
        rng = np.random.default_rng(np.random.SeedSequence([seed, TYPES.index(t), attempt]))
        spec, delay, T = plan_fault(topo, preset, t, rng)
        base = generate_baseline(topo, T // DAY + 1, seed, preset.baseline, incident_hours(T, LOOKBACK))
        store, truth = inject_fault(base, topo, spec, delay)
        if business_impact(base, store, truth, topo.business_metric, delay) >= preset.min_business_impact:
            break
    else:
        raise InvalidInput(f"no {t.value} fault with visible business impact for seed {seed}")
    assert truth.incident_minute == T
    distractors = add_distractors(store, topo, spec, truth, preset, rng)
    return Incident(seed, preset.name, topo, store, truth, [spec], distractors)


def incident_set(preset: ScenarioPreset | str, per_type: int, seed: int = 0,
                 types=TYPES, n_services: int | None = None):
    """Yield ``per_type`` incidents per anomaly type with distinct seeds."""
    for k in range(per_type):
        for t in types:
            yield make_incident(preset, seed + k, t, n_services)


# -- explicit scenario files -------------------------------------------------

@dataclass
class Scenario:
    name: str
    topology: Topology
    store: MetricStore
    truths: list[GroundTruth]
    faults: list[FaultSpec]
    incident_minute: int
    initial_service: str


def fixture_path(name: str) -> Path:
    return Path(str(resources.files("chainrca") / "data" / f"{name}.json"))


def load_scenario_config(path_or_name) -> dict:
    p = Path(path_or_name)
    if not p.exists() and not str(path_or_name).endswith(".json"):
        p = fixture_path(str(path_or_name))
    if not p.exists():
        raise FileNotFoundError(f"scenario config not found: {path_or_name}")
    with open(p) as fh:
        return json.load(fh)


def build_scenario(cfg: dict) -> Scenario:
    """Materialize a scenario config.

    ``cfg`` either names a preset (``preset``, ``anomaly_type``, ``seed``) or
    spells out ``topology``, ``baseline``, ``faults`` and ``incident_minute``.
    """
    seed = int(cfg.get("seed", 0))
    if "preset" in cfg:
        inc = make_incident(get_preset(cfg["preset"]), seed, cfg.get("anomaly_type", "Performance"),
                            cfg.get("n_services"))
        return Scenario(cfg.get("name", inc.preset), inc.topology, inc.store, [inc.truth], inc.faults,
                        inc.truth.incident_minute, inc.truth.initial_service)
    topo_cfg = cfg.get("topology", {})
    if topo_cfg == "example" or topo_cfg.get("fixture") == "example":
        topo = example_topology()
    elif "edges" in topo_cfg:
        topo = Topology.from_dict(topo_cfg)
    else:
        topo = generate_topology(int(topo_cfg.get("n_services", 60)), float(topo_cfg.get("avg_out_degree", 2.5)),
                                 int(topo_cfg.get("seed", seed)))
    base = cfg.get("baseline", {})
    params = BaselineParams.noise_free() if base == "noise_free" else BaselineParams.from_dict(base)
    faults = [FaultSpec.from_dict(f) for f in cfg.get("faults", [])]
    T = int(cfg["incident_minute"]) if "incident_minute" in cfg else None
    delay = int(cfg.get("detect_delay", 6))
    if T is None:
        if not faults:
            raise InvalidInput("scenario needs incident_minute or at least one fault")
        T = faults[0].onset_minute + delay
    days = int(cfg.get("days", max(8, T // DAY + 1)))
    hours = incident_hours(T, LOOKBACK) if cfg.get("window_only", True) else None
    store = generate_baseline(topo, days, seed, params, hours)
    truths = []
    for f in faults:
        store, truth = inject_fault(store, topo, f, delay)
        truths.append(truth)
    initial = cfg.get("initial_service") or (truths[0].initial_service if truths else topo.entry_services[0])
    return Scenario(cfg.get("name", "scenario"), topo, store, truths, faults, T, initial)


def write_scenario(sc: Scenario, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "metrics": out / "metrics.jsonl",
        "topology": out / "topology.json",
        "ground_truth": out / "ground_truth.json",
    }
    sc.store.save_jsonl(paths["metrics"])
    sc.topology.save(paths["topology"])
    paths["ground_truth"].write_text(json.dumps({
        "name": sc.name,
        "incident_minute": sc.incident_minute,
        "initial_service": sc.initial_service,
        "business_metric": sc.topology.business_metric,
        "faults": [f.to_dict() for f in sc.faults],
        "truths": [t.to_dict() for t in sc.truths],
    }, indent=1, sort_keys=True))
    return paths


__all__ = [
    "Incident",
    "PRESETS",
    "Scenario",
    "ScenarioPreset",
    "build_scenario",
    "get_preset",
    "incident_set",
    "load_scenario_config",
    "make_incident",
    "plan_fault",
    "root_candidates",
    "write_scenario",
]
