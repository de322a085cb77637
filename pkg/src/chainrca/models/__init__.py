"""Trainable detectors and their JSON model files."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .forest import ForestClassifier, Node, train_forest
from .oneclass import OneClassSeparator, Standardizer, TrainingError, train_one_class

FORMAT_VERSION = 1

__all__ = [
    "ForestClassifier",
    "ModelLoadError",
    "OneClassSeparator",
    "TrainingError",
    "load",
    "predict",
    "save",
    "train_forest",
    "train_one_class",
]


class ModelLoadError(ValueError):
    pass


def predict(model, features) -> bool:
    """True when ``features`` are classified anomalous."""
    return model.predict(features)


def to_dict(model) -> dict:
    if isinstance(model, OneClassSeparator):
        return {
            "version": FORMAT_VERSION,
            "type": "one_class",
            "gamma": model.gamma,
            "nu": model.nu,
            "rho": model.rho,
            "support_vectors": model.support_vectors.tolist(),
            "alphas": model.alphas.tolist(),
            "standardizer": {
                "mean": model.standardizer.mean.tolist(),
                "scale": model.standardizer.scale.tolist(),
            },
        }
    if isinstance(model, ForestClassifier):
        return {
            "version": FORMAT_VERSION,
            "type": "forest",
            "n_features": model.n_features,
            "max_depth": model.max_depth,
            "seed": model.seed,
            "trees": [t.to_dict() for t in model.trees],
        }
    raise TypeError(f"cannot serialize {type(model).__name__}")


def from_dict(d: dict):
    if d.get("version") != FORMAT_VERSION:
        raise ModelLoadError(f"unsupported model format version {d.get('version')!r}")
    kind = d.get("type")
    if kind == "one_class":
        std = d["standardizer"]
        return OneClassSeparator(
            float(d["gamma"]),
            float(d["nu"]),
            np.asarray(d["support_vectors"], dtype=float),
            np.asarray(d["alphas"], dtype=float),
            float(d["rho"]),
            Standardizer(np.asarray(std["mean"], dtype=float), np.asarray(std["scale"], dtype=float)),
        )
    if kind == "forest":
        return ForestClassifier(
            [Node.from_dict(t) for t in d["trees"]],
            int(d["n_features"]),
            int(d["max_depth"]),
            int(d["seed"]),
        )
    raise ModelLoadError(f"unknown model type {kind!r}")


def save(model, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(to_dict(model), fh)


def load(path: str | Path):
    text = Path(path).read_text()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelLoadError(f"{path}: malformed model file at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    try:
        return from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelLoadError):
            raise
        raise ModelLoadError(f"{path}: invalid model content: {exc!r}") from exc
