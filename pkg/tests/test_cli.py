import dataclasses
import json
from importlib import resources

import jsonschema
import pytest

from chainrca.cli import main


def strip_volatile(obj, drop=()):
    """Drop wall-time fields, plus any key named in ``drop``."""
    if isinstance(obj, dict):
        return {k: strip_volatile(v, drop) for k, v in obj.items() if "wall_time" not in k and k not in drop}
    if isinstance(obj, list):
        return [strip_volatile(v, drop) for v in obj]
    return obj


def schema():
    return json.loads((resources.files("chainrca") / "schemas" / "report.schema.json").read_text())


@pytest.fixture(scope="module")
def scenario(tmp_path_factory):
    out = tmp_path_factory.mktemp("sc")
    assert main(["simulate", "--config", "worked_example", "--out", str(out)]) == 0
    return out


def localize(data, out, *extra):
    assert main(["localize", "--data", str(data), "--out", str(out), *extra]) == 0
    return json.loads((out / "report.json").read_text())


def test_simulate_is_reproducible(scenario, tmp_path):
    assert main(["simulate", "--config", "worked_example", "--out", str(tmp_path)]) == 0
    for name in ("metrics.jsonl", "topology.json", "ground_truth.json"):
        assert (scenario / name).read_bytes() == (tmp_path / name).read_bytes()


def test_simulate_missing_config(tmp_path, capsys):
    assert main(["simulate", "--config", str(tmp_path / "absent.json"), "--out", str(tmp_path)]) != 0
    assert "error" in capsys.readouterr().err
    assert main(["simulate", "--out", str(tmp_path)]) != 0


def test_localize_worked_example(scenario, tmp_path, capsys):
    report = localize(scenario, tmp_path)
    got = {(c["service"], c["anomaly_type"]) for c in report["candidates"]}
    assert got == {("S1", "Traffic"), ("S9", "Performance"), ("S10", "Performance")}
    jsonschema.validate(report, schema())
    assert "S1" in capsys.readouterr().out


def test_localize_json_flag(scenario, tmp_path, capsys):
    localize(scenario, tmp_path, "--json")
    assert '"candidates"' in capsys.readouterr().out


def test_localize_unknown_service(scenario, tmp_path, capsys):
    assert main(["localize", "--data", str(scenario), "--service", "NOPE", "--out", str(tmp_path)]) != 0
    assert "NOPE" in capsys.readouterr().err


def test_localize_bad_model(scenario, tmp_path, capsys):
    truncated = tmp_path / "rt.json"
    truncated.write_text('{"kind": "oneclass", "gamma"')
    assert main(["localize", "--data", str(scenario), "--rt-model", str(truncated), "--out", str(tmp_path)]) != 0
    assert main(["localize", "--data", str(scenario), "--rt-model", str(tmp_path / "absent.json")]) != 0
    assert "error" in capsys.readouterr().err


def test_localize_missing_data(tmp_path):
    assert main(["localize", "--data", str(tmp_path / "none"), "--out", str(tmp_path)]) != 0


def test_localize_empty_graph(scenario, tmp_path, capsys):
    report = localize(scenario, tmp_path, "--minute", "100")
    assert report["candidates"] == [] and report["diagnostic"]
    jsonschema.validate(report, schema())
    assert "no candidates" in capsys.readouterr().out


def test_localize_deterministic(scenario, tmp_path):
    a = localize(scenario, tmp_path / "a")
    b = localize(scenario, tmp_path / "b")
    assert strip_volatile(a) == strip_volatile(b)


def test_localize_thread_independent(scenario, tmp_path):
    a = localize(scenario, tmp_path / "a", "--threads", "1")
    b = localize(scenario, tmp_path / "b", "--threads", "4")
    assert strip_volatile(a, {"threads"}) == strip_volatile(b, {"threads"})


def test_localize_pruning_flag(scenario, tmp_path):
    report = localize(scenario, tmp_path, "--pruning-threshold", "0.9")
    assert report["config"]["pruning_threshold"] == 0.9


def test_config_file_and_override(scenario, tmp_path):
    cfg = tmp_path / "engine.json"
    cfg.write_text(json.dumps({"pruning_threshold": 0.3}))
    report = localize(scenario, tmp_path, "--config", str(cfg), "--seed", "9")
    assert report["config"]["pruning_threshold"] == 0.3 and report["config"]["seed"] == 9
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    assert main(["localize", "--data", str(scenario), "--config", str(bad), "--out", str(tmp_path)]) != 0


def test_evaluate_smoke(tmp_path):
    args = ["evaluate", "--preset", "noise_free", "--per-type", "1", "--services", "20", "--out", str(tmp_path)]
    assert main(args) == 0
    report = json.loads((tmp_path / "benchmark.json").read_text())
    assert report["kind"] == "evaluate" and report["summary"]["issues"] == 3
    assert main(args[:-1] + [str(tmp_path / "again")]) == 0
    again = json.loads((tmp_path / "again" / "benchmark.json").read_text())
    assert strip_volatile(report) == strip_volatile(again)


def test_sweep_smoke(tmp_path):
    assert main(["sweep", "--per-type", "1", "--services", "20", "--thresholds", "0,0.7", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "sweep.csv").read_text().splitlines()[0].startswith("threshold")
    assert main(["sweep", "--per-type", "1", "--thresholds", "0.7,0", "--out", str(tmp_path)]) != 0


def test_scale_smoke(tmp_path):
    assert main(["scale", "--sizes", "20,40", "--faults-per-size", "2", "--repeats", "1", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "scaling.json").read_text())
    assert len(report["points"]) == 2 and "r2" in report["fit"]


def test_train_smoke(tmp_path, monkeypatch):
    from chainrca.simulator import corpus

    small = corpus.CorpusConfig(rt_train_normal=200, rt_heldout=(30, 30), ec_train=(30, 90), ec_heldout=(30, 20),
                                traffic_heldout=(20, 20))
    monkeypatch.setattr(corpus, "CorpusConfig", lambda seed=0: dataclasses.replace(small, seed=seed))
    hyper = tmp_path / "hyper.json"
    hyper.write_text(json.dumps({"n_trees": 5}))
    out = tmp_path / "models"
    assert main(["train", "--config", str(hyper), "--corpus", str(tmp_path / "corpus"), "--out", str(out)]) == 0
    assert (out / "rt_model.json").exists() and (tmp_path / "corpus" / "rt_train.json").exists()
    # second run loads the saved corpus and uses the trained models
    assert main(["train", "--config", str(hyper), "--corpus", str(tmp_path / "corpus"), "--out", str(out)]) == 0
    truncated = tmp_path / "truncated.json"
    truncated.write_text((out / "rt_model.json").read_text()[:50])
    assert main(["localize", "--data", str(tmp_path / "none"), "--rt-model", str(truncated)]) != 0
    bad = tmp_path / "badhyper.json"
    bad.write_text(json.dumps({"momentum": 1}))
    assert main(["train", "--config", str(bad), "--out", str(out)]) != 0
