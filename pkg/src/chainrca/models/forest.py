"""Bagged CART classifier: Gini splits at midpoints of sorted unique values,
majority-class leaves, bootstrap per tree."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..stats import InvalidInput
from .oneclass import TrainingError


@dataclass
class Node:
    label: bool
    feature: int = -1
    threshold: float = 0.0
    left: "Node | None" = None
    right: "Node | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def predict(self, x: np.ndarray) -> bool:
        node = self
        while not node.is_leaf:
            node = node.left if x[node.feature] <= node.threshold else node.right
        return node.label

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"label": self.label}
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Node":
        if "label" in d:
            return cls(bool(d["label"]))
        return cls(
            False,
            int(d["feature"]),
            float(d["threshold"]),
            cls.from_dict(d["left"]),
            cls.from_dict(d["right"]),
        )


def _gini(pos: np.ndarray, total: np.ndarray) -> np.ndarray:
    p = pos / total
    return 2.0 * p * (1.0 - p)


def _best_split(X: np.ndarray, y: np.ndarray):
    n = len(y)
    n_pos = y.sum()
    best = (_gini(np.array(n_pos), np.array(n)) * n, -1, 0.0)
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        ys = y[order]
        cut = np.flatnonzero(xs[1:] != xs[:-1])  # split after position cut
        if cut.size == 0:
            continue
        left_n = cut + 1.0
        left_pos = np.cumsum(ys)[cut]
        right_n = n - left_n
        right_pos = n_pos - left_pos
        cost = _gini(left_pos, left_n) * left_n + _gini(right_pos, right_n) * right_n
        k = int(np.argmin(cost))
        if cost[k] < best[0] - 1e-12:
            best = (cost[k], f, (xs[cut[k]] + xs[cut[k] + 1]) / 2.0)
    return best[1], best[2]


def _grow(X: np.ndarray, y: np.ndarray, depth: int, max_depth: int) -> Node:
    n_pos = int(y.sum())
    # ties inside a leaf go to the normal class
    label = n_pos * 2 > len(y)
    if depth >= max_depth or n_pos == 0 or n_pos == len(y):
        return Node(label)
    f, thr = _best_split(X, y)
    if f < 0:
        return Node(label)
    mask = X[:, f] <= thr
    return Node(
        label,
        f,
        float(thr),
        _grow(X[mask], y[mask], depth + 1, max_depth),
        _grow(X[~mask], y[~mask], depth + 1, max_depth),
    )


@dataclass
class ForestClassifier:
    trees: list[Node]
    n_features: int
    max_depth: int
    seed: int

    def votes(self, x) -> int:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_features,):
            raise InvalidInput(f"expected {self.n_features} features, got shape {x.shape}")
        return sum(t.predict(x) for t in self.trees)

    def predict(self, x) -> bool:
        """Majority vote; an exact tie counts as normal."""
        return self.votes(x) * 2 > len(self.trees)

    def predict_many(self, X) -> np.ndarray:
        return np.array([self.predict(x) for x in np.asarray(X, dtype=float)])


def train_forest(X, y, n_trees: int = 50, max_depth: int = 6, seed: int = 0) -> ForestClassifier:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=bool)
    if X.ndim != 2 or len(X) != len(y):
        raise InvalidInput("X must be 2-D with one label per row")
    if len(y) < 50:
        raise TrainingError("forest training needs at least 50 cases")
    if y.all() or not y.any():
        raise TrainingError("forest training needs both classes")
    yi = y.astype(int)
    trees = []
    # per-tree streams derive from the master seed, so trees are independent
    # of training order
    for child in np.random.SeedSequence(seed).spawn(n_trees):
        idx = np.random.default_rng(child).integers(0, len(y), len(y))
        trees.append(_grow(X[idx], yi[idx], 0, max_depth))
    return ForestClassifier(trees, X.shape[1], max_depth, seed)
