import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from chainrca import graph as call_graph
from chainrca.config import DetectionConfig
from chainrca.detection import (DAY, AnomalyType, ConfigurationError, StoreProvider, detect_performance,
                                detect_reliability, detect_traffic, ec_features_from_windows, ec_rule,
                                extract_ec_features, extract_rt_features, rt_features_from_windows, rt_rule,
                                traffic_anomalous)
from chainrca.simulator import BaselineParams, FaultSpec, example_topology, generate_baseline, generate_topology, inject_fault
from chainrca.simulator.baseline import incident_hours
from chainrca.stats import InvalidInput, Series, pearson, three_sigma_outliers
from chainrca.store import CallRecord, EdgeKey, MetricKind, MetricStore

CFG = DetectionConfig()
pos = st.floats(0.1, 1e3, allow_nan=False)


class TestRtFeatures:
    def test_self_comparison(self):
        rng = np.random.default_rng(1)
        p = rng.normal(50, 2, 60)
        v = rt_features_from_windows(p[-10:], [p, p, p], CFG)
        assert v.shape == (12,)
        for k in range(3):
            assert v[4 * k] == 0 and v[4 * k + 1] <= 0
            assert v[4 * k + 3] == pytest.approx(1.0, abs=0.1)

    def test_hand_computed_spike(self):
        p = np.full(60, 10.0)
        c = [10.0] * 9 + [100.0]
        v = rt_features_from_windows(c, [p, p, p], CFG)
        assert v.tolist() == pytest.approx([1, 90, 1, 1.9] * 3, abs=1e-12)

    def test_zero_baseline_sentinel(self):
        z = np.zeros(60)
        assert rt_features_from_windows(np.zeros(10), [z] * 3, CFG)[3] == 0.0
        assert rt_features_from_windows(np.ones(10), [z] * 3, CFG)[3] == 1e6

    @settings(max_examples=60)
    @given(arrays(float, 10, elements=pos), arrays(float, (3, 60), elements=pos), st.floats(0.01, 100))
    def test_oracle_bounds_and_scaling(self, cur, periods, a):
        v = rt_features_from_windows(cur, list(periods), CFG)
        assert np.allclose(v, oracles.rt_features(list(cur), [list(p) for p in periods], 10), atol=1e-9)
        counts = v.reshape(3, 4)[:, [0, 2]]
        assert np.all((counts >= 0) & (counts <= CFG.detection_window_minutes))
        assert np.all(v.reshape(3, 4)[:, 3] >= 0)
        w = rt_features_from_windows(a * cur, list(a * periods), CFG).reshape(3, 4)
        u = v.reshape(3, 4)
        assert np.array_equal(w[:, [0, 2]], u[:, [0, 2]])
        assert np.allclose(w[:, 1], a * u[:, 1], rtol=1e-9, atol=1e-9)
        assert np.allclose(w[:, 3], u[:, 3], rtol=1e-9, atol=1e-12)

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        c, ps = rng.random(10), [rng.random(60) for _ in range(3)]
        assert rt_features_from_windows(c, ps, CFG).tobytes() == rt_features_from_windows(c, ps, CFG).tobytes()


class TestEcFeatures:
    def test_all_quiet(self):
        v = ec_features_from_windows(np.zeros(60), np.zeros(60), 0.0, np.full(10, 10.0), np.full(10, 100.0), CFG)
        assert v.tolist() == [0, 0, 0, 0, 0]

    def test_hand_run_burst(self):
        hour = np.zeros(60)
        hour[-2:] = 30.0
        rt = 50.0 + 2.0 * hour[-10:]
        v = ec_features_from_windows(hour, np.zeros(60), 0.0, rt, np.full(10, 100.0), CFG)
        # deltas: 58 zeros and two 30s -> mean 1, sigma sqrt(29); both 30s exceed 3 sigma
        assert oracles.three_sigma(list(hour), list(hour[-10:])) == [(8, 30.0), (9, 30.0)]
        assert v[0] == 30.0
        assert v[2] == 1.0
        assert v[3] == pytest.approx(0.3)
        assert v[4] == pytest.approx(1.0)

    def test_max_error_rate(self):
        ec = np.zeros(60)
        ec[-5] = 40.0
        v = ec_features_from_windows(ec, np.zeros(60), 0.0, np.full(10, 5.0), np.full(10, 100.0), CFG)
        assert v[3] == pytest.approx(0.4)
        # no requests means no error rate
        v = ec_features_from_windows(ec, np.zeros(60), 0.0, np.full(10, 5.0), np.zeros(10), CFG)
        assert v[3] == 0.0

    @settings(max_examples=40)
    @given(arrays(float, 60, elements=st.floats(0, 50)), arrays(float, 60, elements=st.floats(0, 50)),
           arrays(float, 10, elements=st.floats(1, 200)))
    def test_ranges(self, hour, prev, rt):
        v = ec_features_from_windows(hour, prev, 0.0, rt, np.full(10, 100.0), CFG)
        assert v[2] in (0.0, 1.0) and 0 <= v[3] <= 1 and -1 <= v[4] <= 1


def quiet_store(minutes=(0, 9 * DAY), rt=10.0, qps=2.0):
    s = MetricStore()
    n = minutes[1] - minutes[0]
    e = EdgeKey("A", "B")
    s.ingest_calls(e, minutes[0], np.full(n, rt), np.zeros(n), np.full(n, qps), np.full(n, qps * 60))
    return s, e


def test_missing_history_skips_and_short_history_degrades(caplog):
    s, e = quiet_store((0, 100))
    assert extract_rt_features(StoreProvider(s), e, 50, CFG).skipped
    assert extract_ec_features(StoreProvider(s), e, 50, CFG).skipped
    res = extract_rt_features(StoreProvider(s), e, 100, CFG)
    assert res.degraded and not res.skipped and res.vector.shape == (12,)


def test_zero_vectors_never_anomalous(bundled_models):
    rt, ec = bundled_models
    assert not rt_rule(np.zeros(12), rt)
    assert not ec_rule(np.zeros(5), ec)


def test_untrained_model_is_configuration_error():
    s, e = quiet_store()
    g = call_graph.build(s, 8 * DAY + 600)
    with pytest.raises(ConfigurationError):
        detect_performance(e, g, None, CFG)
    with pytest.raises(ConfigurationError):
        detect_reliability(e, g, None, CFG)


def test_arity_mismatch(bundled_models):
    rt, ec = bundled_models
    with pytest.raises(InvalidInput):
        rt.predict(np.zeros(5))
    with pytest.raises(InvalidInput):
        ec.predict(np.zeros(12))


def _step(store, edge, T, minutes, rt_factor=1.0, error_rate=0.0):
    """Overwrite the last ``minutes`` before T with a deformed copy."""
    out = store.copy()
    start = T - minutes
    rt = store.query_window(edge, MetricKind.RT, T, minutes).values * rt_factor
    req = store.query_requests(edge, T, minutes).values
    qps = store.query_window(edge, MetricKind.QPS, T, minutes).values
    ec = np.minimum(req, store.query_window(edge, MetricKind.EC, T, minutes).values + error_rate * req)
    out.ingest_calls(edge, start, rt, ec, qps, req)
    return out


@pytest.fixture(scope="module")
def baseline_edges():
    """About 200 (store, edge, T) no-fault cases from seeded noisy baselines."""
    cases = []
    rng = np.random.default_rng(2024)
    for seed in range(5):
        topo = generate_topology(40, seed=seed)
        T = 8 * DAY + int(rng.integers(0, DAY))
        store = generate_baseline(topo, 9, seed, BaselineParams(), incident_hours(T))
        cases += [(store, topo.edges[i], T) for i in sorted(rng.permutation(len(topo.edges))[:40])]
    return cases


def test_baseline_edges_mostly_normal(baseline_edges, bundled_models):
    rt, ec = bundled_models
    normal_rt = normal_ec = 0
    for store, e, T in baseline_edges:
        p = StoreProvider(store)
        normal_rt += not rt_rule(extract_rt_features(p, e, T, CFG).vector, rt)
        normal_ec += not ec_rule(extract_ec_features(p, e, T, CFG).vector, ec)
    assert normal_rt >= 0.95 * len(baseline_edges)
    assert normal_ec >= 0.95 * len(baseline_edges)


def test_injected_steps_mostly_detected(baseline_edges, bundled_models):
    rt, ec = bundled_models
    hit_rt = hit_ec = 0
    for store, e, T in baseline_edges:
        s1 = _step(store, e, T, 6, rt_factor=10.0)
        hit_rt += rt_rule(extract_rt_features(StoreProvider(s1), e, T, CFG).vector, rt)
        s2 = _step(store, e, T, 6, error_rate=0.3)
        hit_ec += ec_rule(extract_ec_features(StoreProvider(s2), e, T, CFG).vector, ec)
    assert hit_rt >= 0.95 * len(baseline_edges)
    assert hit_ec >= 0.95 * len(baseline_edges)


class TestTraffic:
    def test_flat_not_anomalous(self):
        assert not traffic_anomalous(np.full(60, 5.0), np.full(60, 2.0), CFG)[0]

    def test_simulated_drop_with_business(self):
        topo = example_topology()
        T = 8 * DAY + 600
        base = generate_baseline(topo, 9, 0, BaselineParams(), incident_hours(T))
        spec = FaultSpec("S4", ("S4", "S5"), AnomalyType.TRAFFIC, T - 6, 0.2)
        store, truth = inject_fault(base, topo, spec, 6)
        assert truth.initial_service == "S5" and truth.incident_minute == T
        g = call_graph.build(store, T)
        business = store.query_business("S5", topo.business_metric, T, 60)
        qps = g.edge_series(EdgeKey("S4", "S5"), MetricKind.QPS).values
        assert oracles.three_sigma(list(qps[:-10]), list(qps[-10:]))
        assert abs(oracles.pearson(list(qps), list(business.values))) >= 0.9
        assert detect_traffic(EdgeKey("S4", "S5"), g, business, CFG).anomalous

    def test_drop_without_business_move(self):
        qps = np.full(60, 10.0)
        qps[-5:] = 2.0
        assert three_sigma_outliers(qps[:-10], qps[-10:])
        assert not traffic_anomalous(qps, np.full(60, 7.0), CFG)[0]

    @settings(max_examples=60)
    @given(arrays(float, 60, elements=st.floats(0, 100)), arrays(float, 60, elements=st.floats(0, 100)))
    def test_gate_off_reduces_to_three_sigma(self, qps, biz):
        off = DetectionConfig(traffic_correlation_threshold=0.0)
        assert traffic_anomalous(qps, biz, off)[0] == bool(three_sigma_outliers(qps[:-10], qps[-10:]))


def test_verdicts_on_worked_example(worked_example, bundled_models):
    rt, ec = bundled_models
    sc = worked_example
    g = call_graph.build(sc.store, sc.incident_minute)
    biz = sc.store.query_business("S5", sc.topology.business_metric, sc.incident_minute, 60)
    assert detect_traffic(EdgeKey("S4", "S5"), g, biz, CFG).anomalous
    assert detect_performance(EdgeKey("S5", "S7"), g, rt, CFG).anomalous
    assert not detect_performance(EdgeKey("S5", "S8"), g, rt, CFG).anomalous
    assert not detect_reliability(EdgeKey("S5", "S7"), g, ec, CFG).anomalous


def test_anomaly_type_bindings():
    assert AnomalyType.PERFORMANCE.metric is MetricKind.RT
    assert AnomalyType.RELIABILITY.metric is MetricKind.EC
    assert AnomalyType.TRAFFIC.metric is MetricKind.QPS
    assert AnomalyType.TRAFFIC.source_side == "upstream"
    assert AnomalyType.PERFORMANCE.source_side == AnomalyType.RELIABILITY.source_side == "downstream"


def test_config_validation():
    with pytest.raises(InvalidInput):
        DetectionConfig(detection_window_minutes=0)
    with pytest.raises(InvalidInput):
        DetectionConfig(traffic_correlation_threshold=1.5)
