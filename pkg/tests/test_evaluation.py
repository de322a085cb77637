import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from chainrca.config import EngineConfig
from chainrca.detection import AnomalyType
from chainrca.evaluation import (hr_at_k, incident_factories, linear_fit, mrr, run_benchmark, scaling_csv,
                                 scaling_run, sweep_csv, sweep_pruning_threshold)
from chainrca.stats import InvalidInput

ranks_st = st.lists(st.one_of(st.none(), st.integers(1, 12)), min_size=1, max_size=60)


class TestMetrics:
    def test_examples(self):
        assert hr_at_k([1, None, 3, 2], 1) == 0.25
        assert hr_at_k([1, None, 4, 2], 3) == 0.5
        assert mrr([1, 2, None]) == pytest.approx(0.5)
        assert mrr([None, None]) == 0.0
        assert hr_at_k([None], 5) == 0.0

    def test_errors(self):
        with pytest.raises(InvalidInput):
            hr_at_k([], 1)
        with pytest.raises(InvalidInput):
            mrr([])
        with pytest.raises(InvalidInput):
            hr_at_k([1], 0)

    def test_oracle_batch(self):
        rng = np.random.default_rng(20)
        ranks = [None if rng.random() < 0.2 else int(rng.integers(1, 8)) for _ in range(20)]
        for k in (1, 3, 5):
            assert hr_at_k(ranks, k) == pytest.approx(oracles.hr_at_k(ranks, k), abs=1e-12)
        assert mrr(ranks) == pytest.approx(oracles.mrr(ranks), abs=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(ranks_st)
    def test_properties(self, ranks):
        hs = [hr_at_k(ranks, k) for k in range(1, 14)]
        assert all(a <= b for a, b in zip(hs, hs[1:]))
        assert all(0.0 <= h <= 1.0 for h in hs)
        assert hs[-1] == pytest.approx(sum(r is not None for r in ranks) / len(ranks))
        assert mrr(ranks) <= hs[-1] + 1e-12
        assert hs[0] <= mrr(ranks) + 1e-12


@pytest.fixture(scope="module")
def small_bench(bundled_models):
    rt, ec = bundled_models
    factories = incident_factories("noise_free", 2, seed=0)

    def broken():
        raise RuntimeError("generator exploded")

    return run_benchmark(factories[:3] + [broken] + factories[3:], rt, ec, EngineConfig())


class TestBenchmark:
    def test_continues_past_failures(self, small_bench):
        assert len(small_bench.results) == 6
        assert small_bench.failures == [{"index": 3, "error": "RuntimeError: generator exploded"}]

    def test_aggregates_match_issues(self, small_bench):
        s = small_bench.summary()
        ranks = [r.rank for r in small_bench.results]
        assert s["issues"] == 6 and s["failures"] == 1
        assert s["hr@1"] == oracles.hr_at_k(ranks, 1)
        assert s["mrr"] == pytest.approx(oracles.mrr(ranks))
        assert s["mean_edges_examined"] == pytest.approx(np.mean([r.edges_examined for r in small_bench.results]))
        assert s["hr@1"] == 1.0

    def test_to_dict(self, small_bench):
        d = small_bench.to_dict()
        assert len(d["issues"]) == 6
        assert {i["ground_truth"]["anomaly_type"] for i in d["issues"]} == {t.value for t in AnomalyType}

    def test_factories_order(self):
        f = incident_factories("noise_free", 2, seed=5)
        assert len(f) == 6
        assert [inc.truth.anomaly_type for inc in (f[0](), f[1](), f[2]())] == list(AnomalyType)


class TestSweepAndScaling:
    def test_sweep_sorted(self, bundled_models):
        with pytest.raises(InvalidInput):
            sweep_pruning_threshold([], [0.5, 0.3], *bundled_models)

    def test_sweep_small(self, bundled_models):
        curve = sweep_pruning_threshold(incident_factories("sweep", 1, seed=0), [0.0, 0.7], *bundled_models)
        assert [p.threshold for p in curve] == [0.0, 0.7]
        assert curve[1].mean_edges_examined <= curve[0].mean_edges_examined
        rows = list(csv.reader(io.StringIO(sweep_csv(curve))))
        assert rows[0][0] == "threshold" and len(rows) == 3

    def test_linear_fit(self):
        x = [1, 2, 3, 4]
        slope, intercept, r2 = linear_fit(x, [3 + 2 * v for v in x])
        assert slope == pytest.approx(2) and intercept == pytest.approx(3) and r2 == pytest.approx(1)
        assert linear_fit([1, 2, 3], [5, 5, 5])[2] == 1.0
        _, _, r2 = linear_fit([1, 2, 3, 4], [1, 3, 2, 4])
        assert r2 == pytest.approx(0.64)

    def test_scaling_small(self, bundled_models):
        res = scaling_run([20, 40], 3, 0, *bundled_models, repeats=1)
        assert res.sizes == [20, 40] and len(res.mean_times) == 2
        assert all(t > 0 for t in res.mean_times) and not math.isnan(res.r2)
        assert scaling_csv(res).splitlines()[0] == "services,mean_wall_time_seconds,hr@3"
        with pytest.raises(InvalidInput):
            scaling_run([40, 20], 1, 0, *bundled_models)
