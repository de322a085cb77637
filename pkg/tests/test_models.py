import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chainrca import models
from chainrca.models import ModelLoadError, TrainingError, train_forest, train_one_class
from chainrca.models.oneclass import Standardizer, rbf
from chainrca.stats import InvalidInput


@pytest.fixture(scope="module")
def blob():
    return np.random.default_rng(0).normal(0.0, 1.0, (500, 4))


@pytest.fixture(scope="module")
def oc(blob):
    return train_one_class(blob, nu=0.05, seed=0)


class TestOneClass:
    def test_invariants(self, oc, blob):
        n = len(blob)
        assert oc.alphas.sum() == pytest.approx(1.0, abs=1e-9)
        assert np.all(oc.alphas >= 0)
        assert np.all(oc.alphas <= 1.0 / (oc.nu * n) + 1e-9)
        # decision function written out from its definition
        x = blob[:7] + 0.3
        z = (x - oc.standardizer.mean) / oc.standardizer.scale
        k = np.exp(-oc.gamma * ((z[:, None, :] - oc.support_vectors[None]) ** 2).sum(-1))
        assert np.allclose(oc.decision(x), k @ oc.alphas - oc.rho, atol=1e-9)

    def test_far_probe_is_outlier_centroid_is_normal(self, oc, blob):
        assert oc.predict(blob.mean(0) + 10 * blob.std(0))
        assert not oc.predict(blob.mean(0))

    def test_training_outlier_fraction(self, oc, blob):
        assert oc.predict_many(blob).mean() <= 0.05 + 0.05

    def test_errors(self, blob):
        with pytest.raises(TrainingError):
            train_one_class(np.ones((60, 3)))
        with pytest.raises(TrainingError):
            train_one_class(blob[:20])

    def test_scale_absorbed_by_standardizer(self, blob):
        s = np.array([1.0, 100.0, 0.01, 7.0])
        a = train_one_class(blob, nu=0.05)
        b = train_one_class(blob * s, nu=0.05)
        probe = np.random.default_rng(1).normal(0, 2, (300, 4))
        assert np.array_equal(a.predict_many(probe), b.predict_many(probe * s))

    @settings(max_examples=50)
    @given(st.lists(st.floats(-5, 5), min_size=4, max_size=4), st.integers(0, 3))
    def test_decision_lipschitz(self, oc, v, axis):
        x = np.array(v)
        y = x.copy()
        y[axis] += 1e-6
        assert abs(oc.decision(x)[0] - oc.decision(y)[0]) < 1e-3

    def test_smo_matches_projected_gradient_optimum(self):
        # the dual optimum found by SMO and by a slow projected-gradient
        # solver agree in objective value
        X = np.random.default_rng(3).normal(0, 1, (60, 2))
        m = train_one_class(X, nu=0.2, gamma=0.5, tol=1e-8, max_iter=100_000)
        Z = Standardizer.fit(X).transform(X)
        K = rbf(Z, Z, 0.5)
        C = 1.0 / (0.2 * 60)
        a = np.full(60, 1.0 / 60)
        step = 1.0 / np.linalg.eigvalsh(K).max()
        for _ in range(3000):
            a = _project(a - step * (K @ a), C)
        full = np.zeros(60)
        sv = {tuple(r): w for r, w in zip(np.round(m.support_vectors, 12), m.alphas)}
        for i, z in enumerate(np.round(Z, 12)):
            full[i] = sv.get(tuple(z), 0.0)
        assert full @ K @ full == pytest.approx(a @ K @ a, rel=1e-4)


def _project(v, C):
    """Euclidean projection onto {0 <= a <= C, sum a = 1} by bisection."""
    lo, hi = v.min() - C, v.max()
    for _ in range(60):
        t = (lo + hi) / 2
        if np.clip(v - t, 0, C).sum() > 1:
            lo = t
        else:
            hi = t
    return np.clip(v - (lo + hi) / 2, 0, C)


def separable(n=200, seed=0):
    rng = np.random.default_rng(seed)
    y = rng.random(n) < 0.3
    x = np.where(y, rng.uniform(1, 3, n), rng.uniform(-3, 0, n))
    return np.column_stack([x, rng.normal(size=n)]), y


class TestForest:
    def test_separable_held_out_perfect(self):
        X, y = separable()
        f = train_forest(X, y, n_trees=15, max_depth=3, seed=1)
        Xh, yh = separable(seed=5)
        assert np.array_equal(f.predict_many(Xh), yh)

    def test_deterministic(self):
        X, y = separable()
        a = models.to_dict(train_forest(X, y, 10, 4, seed=3))
        b = models.to_dict(train_forest(X, y, 10, 4, seed=3))
        assert json.dumps(a) == json.dumps(b)

    def test_errors(self):
        X, y = separable()
        with pytest.raises(TrainingError):
            train_forest(X, np.zeros(len(y), bool))
        with pytest.raises(TrainingError):
            train_forest(X[:20], y[:20])

    def test_tie_is_normal(self):
        X, y = separable()
        f = train_forest(X, y, n_trees=2, max_depth=2)
        f.trees[1] = f.trees[1].__class__(label=not f.trees[0].predict(X[0]))
        assert f.votes(X[0]) == 1 and not f.predict(X[0])

    def test_monotone_transform_invariance(self):
        X, y = separable(300, seed=2)
        rng = np.random.default_rng(4)
        X = X + rng.normal(0, 0.5, X.shape)
        probe = rng.normal(0, 2, (400, 2))
        g = lambda A: np.column_stack([np.exp(A[:, 0]), A[:, 1] ** 3])  # noqa: E731
        a = train_forest(X, y, 20, 5, seed=0).predict_many(probe)
        b = train_forest(g(X), y, 20, 5, seed=0).predict_many(g(probe))
        assert np.array_equal(a, b)

    def test_training_accuracy_on_noisy_data(self):
        X, y = separable(400, seed=6)
        X = X + np.random.default_rng(6).normal(0, 0.3, X.shape)
        f = train_forest(X, y, seed=0)
        assert (f.predict_many(X) == y).mean() >= 0.9


class TestSerialization:
    def test_round_trip_1000_vectors(self, tmp_path, oc):
        X, y = separable()
        forest = train_forest(X, y, 10, 4)
        rng = np.random.default_rng(11)
        for m, d in ((oc, 4), (forest, 2)):
            path = tmp_path / "m.json"
            models.save(m, path)
            back = models.load(path)
            probe = rng.normal(0, 3, (1000, d))
            assert np.array_equal(m.predict_many(probe), back.predict_many(probe))
        back = models.load(tmp_path / "m.json")
        models.save(oc, tmp_path / "oc.json")
        again = models.load(tmp_path / "oc.json")
        probe = rng.normal(0, 3, (1000, 4))
        assert np.allclose(oc.decision(probe), again.decision(probe), atol=1e-9, rtol=0)

    def test_truncated_file(self, tmp_path, oc):
        path = tmp_path / "m.json"
        models.save(oc, path)
        path.write_text(path.read_text()[:100])
        with pytest.raises(ModelLoadError, match="line 1 column"):
            models.load(path)

    def test_bad_content(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text(json.dumps({"version": 1, "type": "forest"}))
        with pytest.raises(ModelLoadError):
            models.load(path)
        path.write_text(json.dumps({"version": 99}))
        with pytest.raises(ModelLoadError):
            models.load(path)

    def test_arity_mismatch(self, oc):
        with pytest.raises(InvalidInput):
            models.predict(oc, np.zeros(3))
