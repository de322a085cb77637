import json

import numpy as np
import pytest

from chainrca import models
from chainrca.simulator.corpus import CorpusConfig, default_corpus
from chainrca.stats import InvalidInput
from chainrca.training import (TrainConfig, classification_metrics, format_report, heldout_report, load_models,
                               train_models, write_models)


def test_metrics_by_hand():
    m = classification_metrics([1, 1, 1, 0, 0, 0, 0], [1, 1, 0, 1, 0, 0, 0])
    assert (m["tp"], m["fp"], m["fn"], m["tn"]) == (2, 1, 1, 3)
    assert m["recall"] == pytest.approx(2 / 3) and m["precision"] == pytest.approx(2 / 3)
    assert m["f1"] == pytest.approx(2 / 3) and m["fpr"] == pytest.approx(0.25)


def test_metrics_degenerate():
    m = classification_metrics([0, 0], [0, 0])
    assert m["f1"] == 0.0 and m["fpr"] == 0.0


def test_config_rejects_unknown_keys():
    assert TrainConfig.from_dict({"nu": 0.1}).nu == 0.1
    with pytest.raises(InvalidInput):
        TrainConfig.from_dict({"learning_rate": 1})


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    cfg = CorpusConfig(rt_train_normal=300, rt_heldout=(60, 60), ec_train=(60, 180), ec_heldout=(60, 40),
                       traffic_heldout=(40, 40), seed=3)
    corpus = default_corpus(cfg)
    rt, ec = train_models(corpus, TrainConfig(n_trees=10))
    report = heldout_report(corpus, rt, ec)
    out = tmp_path_factory.mktemp("models")
    write_models(out, rt, ec, report, TrainConfig(n_trees=10))
    return corpus, rt, ec, report, out


def test_report_columns(small_run):
    _, _, _, report, _ = small_run
    assert list(report) == ["Performance", "Reliability", "Traffic"]
    for m in report.values():
        assert {"recall", "precision", "f1", "fpr"} <= set(m)
        assert m["f1"] >= 0.8
    head = format_report(report).splitlines()[0].split()
    assert head == ["detector", "Recall", "Precision", "F1", "FPR"]


def test_written_models_reload(small_run):
    corpus, rt, ec, _, out = small_run
    rt2, ec2 = load_models(out / "rt_model.json", out / "ec_model.json")
    X = corpus.rt_heldout.X
    assert np.array_equal(rt.predict_many(X), rt2.predict_many(X))
    Y = corpus.ec_heldout.X
    assert np.array_equal(ec.predict_many(Y), ec2.predict_many(Y))
    body = json.loads((out / "train_report.json").read_text())
    assert body["hyperparameters"]["n_trees"] == 10


def test_bundled_models_load(bundled_models):
    rt, ec = bundled_models
    assert isinstance(rt, models.OneClassSeparator) and isinstance(ec, models.ForestClassifier)
