"""One-class SVM with an RBF kernel, trained by SMO on the dual

    min_a  1/2 a^T K a   s.t.  0 <= a_i <= 1/(nu n),  sum a_i = 1

Decision value for ``v`` is ``sum_i a_i K(sv_i, v) - rho``; negative means
outlier.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..stats import InvalidInput


class TrainingError(RuntimeError):
    pass


@dataclass
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale[scale == 0] = 1.0
        return cls(mean, scale)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.scale


def rbf(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclass
class OneClassSeparator:
    gamma: float
    nu: float
    support_vectors: np.ndarray
    alphas: np.ndarray
    rho: float
    standardizer: Standardizer

    @property
    def n_features(self) -> int:
        return self.support_vectors.shape[1]

    def decision(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise InvalidInput(f"expected {self.n_features} features, got {X.shape[1]}")
        Z = self.standardizer.transform(X)
        return rbf(Z, self.support_vectors, self.gamma) @ self.alphas - self.rho

    def predict(self, x) -> bool:
        """True when ``x`` falls outside the learned normal region."""
        return bool(self.decision(x)[0] < 0)

    def predict_many(self, X) -> np.ndarray:
        return self.decision(X) < 0


def default_gamma(Z: np.ndarray) -> float:
    var = float(Z.var(axis=0).mean())
    return 1.0 / (Z.shape[1] * var) if var > 0 else 1.0


def train_one_class(
    X,
    nu: float = 0.05,
    gamma: float | None = None,
    seed: int = 0,
    tol: float = 1e-4,
    max_iter: int = 10_000,
) -> OneClassSeparator:
    """Fit on normal-only feature vectors.

    ``seed`` only shuffles the initial feasible point, so different seeds
    converge to the same optimum up to ``tol``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or len(X) < 50:
        raise TrainingError("one-class training needs at least 50 vectors")
    if not 0.0 < nu <= 1.0:
        raise InvalidInput("nu must lie in (0, 1]")
    if np.all(X == X[0]):
        raise TrainingError("degenerate training data: all vectors identical")
    std = Standardizer.fit(X)
    Z = std.transform(X)
    if gamma is None:
        gamma = default_gamma(Z)
    n = len(Z)
    C = 1.0 / (nu * n)
    K = rbf(Z, Z, gamma)
    diag = np.diag(K).copy()

    # feasible start: fill the first nu*n multipliers (libsvm convention)
    order = np.random.default_rng(seed).permutation(n)
    a = np.zeros(n)
    remaining = 1.0
    for i in order:
        take = min(C, remaining)
        a[i] = take
        remaining -= take
        if remaining <= 1e-15:
            break
    G = K @ a

    eps = 1e-12
    for _ in range(max_iter):
        up = a < C - eps
        down = a > eps
        if not up.any() or not down.any():
            break
        gi = np.where(up, G, np.inf)
        gj = np.where(down, G, -np.inf)
        i = int(np.argmin(gi))
        j = int(np.argmax(gj))
        gap = G[j] - G[i]
        if gap < tol:
            break
        curv = diag[i] + diag[j] - 2.0 * K[i, j]
        step = gap / curv if curv > eps else np.inf
        step = min(step, C - a[i], a[j])
        a[i] += step
        a[j] -= step
        G += step * (K[:, i] - K[:, j])

    a[a < eps] = 0.0
    a /= a.sum()
    G = K @ a
    free = (a > eps) & (a < C - eps)
    if free.any():
        rho = float(G[free].mean())
    else:
        lo = G[a < C - eps].min() if (a < C - eps).any() else G.min()
        hi = G[a > eps].max()
        rho = float((lo + hi) / 2.0)
    sv = a > 0
    return OneClassSeparator(float(gamma), float(nu), Z[sv].copy(), a[sv].copy(), rho, std)
