"""Detector training on a simulated corpus and held-out quality reports."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from importlib import resources
from pathlib import Path

import numpy as np

from . import models
from .config import DetectionConfig
from .detection import ec_rule, rt_rule, traffic_anomalous
from .stats import InvalidInput
from .simulator.corpus import Corpus


@dataclass(frozen=True)
class TrainConfig:
    # a wide kernel generalizes past the diurnal ramps seen in training
    nu: float = 0.01
    gamma: float | None = 0.01
    n_trees: int = 50
    max_depth: int = 6
    seed: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        if set(d) - known:
            raise InvalidInput(f"unknown training keys: {sorted(set(d) - known)}")
        return cls(**d)


def classification_metrics(y, pred) -> dict:
    y = np.asarray(y, dtype=bool)
    pred = np.asarray(pred, dtype=bool)
    tp = int(np.sum(y & pred))
    fp = int(np.sum(~y & pred))
    fn = int(np.sum(y & ~pred))
    tn = int(np.sum(~y & ~pred))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    fpr = fp / (fp + tn) if fp + tn else 0.0
    return {"recall": recall, "precision": precision, "f1": f1, "fpr": fpr,
            "tp": tp, "fp": fp, "fn": fn, "tn": tn}


def train_models(corpus: Corpus, cfg: TrainConfig | None = None):
    cfg = cfg or TrainConfig()
    rt_train = corpus.rt_train.X[~corpus.rt_train.y]
    rt = models.train_one_class(rt_train, nu=cfg.nu, gamma=cfg.gamma, seed=cfg.seed)
    ec = models.train_forest(corpus.ec_train.X, corpus.ec_train.y, cfg.n_trees, cfg.max_depth, cfg.seed)
    return rt, ec


def heldout_report(corpus: Corpus, rt_model, ec_model, detection: DetectionConfig | None = None) -> dict:
    """Classification metrics of each detector on held-out cases."""
    detection = detection or DetectionConfig()
    rt_pred = [rt_rule(x, rt_model) for x in corpus.rt_heldout.X]
    ec_pred = [ec_rule(x, ec_model) for x in corpus.ec_heldout.X]
    cases, y, _ = corpus.traffic_heldout
    qps_pred = [traffic_anomalous(c.qps, c.business, detection)[0] for c in cases]
    return {
        "Performance": classification_metrics(corpus.rt_heldout.y, rt_pred),
        "Reliability": classification_metrics(corpus.ec_heldout.y, ec_pred),
        "Traffic": classification_metrics(y, qps_pred),
    }


def format_report(report: dict) -> str:
    lines = [f"{'detector':<12} {'Recall':>7} {'Precision':>9} {'F1':>7} {'FPR':>7}"]
    for name, m in report.items():
        lines.append(f"{name:<12} {m['recall']:7.3f} {m['precision']:9.3f} {m['f1']:7.3f} {m['fpr']:7.3f}")
    return "\n".join(lines)


def write_models(out_dir, rt_model, ec_model, report: dict | None = None, cfg: TrainConfig | None = None):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    models.save(rt_model, out / "rt_model.json")
    models.save(ec_model, out / "ec_model.json")
    if report is not None:
        body = {"heldout": report, "hyperparameters": asdict(cfg or TrainConfig())}
        (out / "train_report.json").write_text(json.dumps(body, indent=1, sort_keys=True))


def default_model_paths() -> tuple[Path, Path]:
    """Models trained on the default corpus and shipped with the package."""
    base = Path(str(resources.files("chainrca") / "data" / "models"))
    return base / "rt_model.json", base / "ec_model.json"


def load_models(rt_path=None, ec_path=None):
    d_rt, d_ec = default_model_paths()
    return models.load(rt_path or d_rt), models.load(ec_path or d_ec)
