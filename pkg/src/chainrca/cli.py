"""Command-line entry point: simulate, train, localize, evaluate, sweep, scale.

Every command takes an optional JSON ``--config``; flags override it and
are echoed into the report.  Reports are written with sorted keys so reruns
differ only in wall-time fields.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import evaluation
from .config import EngineConfig
from .engine import REPORT_SCHEMA_VERSION, localize
from .models import ModelLoadError
from .stats import InvalidInput
from .store import MetricStore

log = logging.getLogger("chainrca")

DEFAULT_THRESHOLDS = (0.0, 0.3, 0.5, 0.7, 0.9)
DEFAULT_SIZES = (100, 250, 500, 1000, 2000)


class CommandError(Exception):
    """Reported as a one-line message with a nonzero exit code."""


def _read_json(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise CommandError(f"config not found: {path}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise CommandError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _write(out_dir, name: str, text: str) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text)
    return path


def _dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _echo(args) -> dict:
    """Flags for provenance; the output location is not part of the result."""
    skip = {"func", "out", "verbose"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _engine_config(args) -> EngineConfig:
    base = EngineConfig.from_dict(_read_json(args.config)) if args.config else EngineConfig()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.threads is not None:
        changes["threads"] = args.threads
    if getattr(args, "pruning_threshold", None) is not None:
        changes["pruning_threshold"] = args.pruning_threshold
    if getattr(args, "rt_model", None):
        changes["rt_model_path"] = args.rt_model
    if getattr(args, "ec_model", None):
        changes["ec_model_path"] = args.ec_model
    return base.replace(**changes) if changes else base


def _models(config: EngineConfig):
    from .training import load_models

    try:
        return load_models(config.rt_model_path, config.ec_model_path)
    except FileNotFoundError as exc:
        raise CommandError(f"model file not found: {exc.filename}") from exc


# -- simulate --------------------------------------------------------------

def cmd_simulate(args) -> int:
    from .simulator.scenarios import build_scenario, load_scenario_config, write_scenario

    if not args.config:
        raise CommandError("simulate needs --config <scenario.json or fixture name>")
    try:
        cfg = load_scenario_config(args.config)
    except FileNotFoundError as exc:
        raise CommandError(str(exc)) from exc
    if args.seed is not None:
        cfg = dict(cfg, seed=args.seed)
    sc = build_scenario(cfg)
    paths = write_scenario(sc, args.out)
    print(f"scenario {sc.name}: {len(sc.topology.services)} services, {len(sc.topology.edges)} edges")
    print(f"incident at minute {sc.incident_minute} on {sc.initial_service}")
    for t in sc.truths:
        print(f"  root cause {t.root_service} ({t.anomaly_type.value})")
    for name, p in paths.items():
        print(f"{name:<14}{p}")
    return 0


# -- train -----------------------------------------------------------------

def cmd_train(args) -> int:
    from .simulator.corpus import Corpus, CorpusConfig, default_corpus
    from .training import TrainConfig, format_report, heldout_report, train_models, write_models

    hyper = _read_json(args.config) if args.config else {}
    if args.seed is not None:
        hyper["seed"] = args.seed
    try:
        cfg = TrainConfig.from_dict(hyper)
    except TypeError as exc:
        raise CommandError(f"bad hyperparameters: {exc}") from exc
    corpus_dir = Path(args.corpus) if args.corpus else None
    if corpus_dir is not None and (corpus_dir / "rt_train.json").exists():
        corpus = Corpus.load(corpus_dir)
    else:
        corpus = default_corpus(CorpusConfig(seed=cfg.seed))
        if corpus_dir is not None:
            corpus.save(corpus_dir)
    rt, ec = train_models(corpus, cfg)
    report = heldout_report(corpus, rt, ec)
    write_models(args.out, rt, ec, report, cfg)
    print(format_report(report))
    print(f"models written to {args.out}")
    return 0


# -- localize --------------------------------------------------------------

def _incident_defaults(data_dir: Path) -> dict:
    gt = data_dir / "ground_truth.json"
    return json.loads(gt.read_text()) if gt.exists() else {}


def _summary_lines(report: dict) -> list[str]:
    inc = report["incident"]
    lines = [f"incident on {inc['initial_service']} at minute {inc['incident_minute']}"]
    if not report["candidates"]:
        lines.append(f"no candidates: {report['diagnostic']}")
    for c in report["candidates"]:
        lines.append(f"{c['rank']:>3}. {c['service']:<12} {c['anomaly_type']:<12} score {c['score']:.3f}")
    k = report["counters"]
    lines.append(f"edges examined {k['edges_examined']}, detector calls {k['detector_calls']}")
    return lines


def cmd_localize(args) -> int:
    data_dir = Path(args.data)
    metrics = data_dir / "metrics.jsonl" if data_dir.is_dir() else data_dir
    if not metrics.is_file():
        raise CommandError(f"no metric file at {metrics}")
    defaults = _incident_defaults(data_dir) if data_dir.is_dir() else {}
    service = args.service or defaults.get("initial_service")
    minute = args.minute if args.minute is not None else defaults.get("incident_minute")
    metric = args.business_metric or defaults.get("business_metric")
    if service is None or minute is None or metric is None:
        raise CommandError("localize needs --service, --minute and --business-metric")
    config = _engine_config(args)
    rt, ec = _models(config)
    store = MetricStore.load_jsonl(metrics)
    try:
        loc = localize(store, service, int(minute), metric, rt, ec, config)
    except InvalidInput as exc:
        raise CommandError(str(exc)) from exc
    report = loc.report(config)
    report["args"] = _echo(args)
    text = _dumps(report)
    if args.out:
        print(f"report written to {_write(args.out, 'report.json', text)}")
    if args.json:
        sys.stdout.write(text)
    print("\n".join(_summary_lines(report)))
    return 0


# -- evaluate / sweep / scale ------------------------------------------------

def _with_header(kind: str, config: EngineConfig, args, body: dict) -> dict:
    return {"schema_version": REPORT_SCHEMA_VERSION, "kind": kind, "config": config.to_dict(),
            "args": _echo(args), **body}


def cmd_evaluate(args) -> int:
    config = _engine_config(args)
    rt, ec = _models(config)
    factories = evaluation.incident_factories(args.preset, args.per_type, config.seed, n_services=args.services)
    bench = evaluation.run_benchmark(factories, rt, ec, config)
    report = _with_header("evaluate", config, args, bench.to_dict())
    if args.out:
        _write(args.out, "benchmark.json", _dumps(report))
    print(evaluation.benchmark_table(bench))
    return 0


def cmd_sweep(args) -> int:
    config = _engine_config(args)
    rt, ec = _models(config)
    factories = evaluation.incident_factories(args.preset, args.per_type, config.seed, n_services=args.services)
    try:
        curve = evaluation.sweep_pruning_threshold(factories, args.thresholds, rt, ec, config)
    except InvalidInput as exc:
        raise CommandError(str(exc)) from exc
    report = _with_header("sweep", config, args, {"curve": [p.to_dict() for p in curve]})
    csv_text = evaluation.sweep_csv(curve)
    if args.out:
        _write(args.out, "sweep.json", _dumps(report))
        _write(args.out, "sweep.csv", csv_text)
    sys.stdout.write(csv_text)
    return 0


def cmd_scale(args) -> int:
    config = _engine_config(args)
    rt, ec = _models(config)
    try:
        res = evaluation.scaling_run(args.sizes, args.faults_per_size, config.seed, rt, ec, config,
                                     args.preset, args.repeats)
    except InvalidInput as exc:
        raise CommandError(str(exc)) from exc
    report = _with_header("scale", config, args, res.to_dict())
    csv_text = evaluation.scaling_csv(res)
    if args.out:
        _write(args.out, "scaling.json", _dumps(report))
        _write(args.out, "scaling.csv", csv_text)
    sys.stdout.write(csv_text)
    print(f"linear fit: slope {res.slope:.3e} s/service, R^2 {res.r2:.3f}")
    return 0


# -- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chainrca", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def command(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--threads", type=int, help="cap on worker threads")
        p.add_argument("--out", help="output directory")
        p.set_defaults(func=func)
        return p

    p = command("simulate", cmd_simulate, "generate a scenario dataset")
    p.set_defaults(out="scenario_out")

    p = command("train", cmd_train, "train detectors and report held-out quality")
    p.add_argument("--corpus", help="corpus directory; generated and saved there when absent")
    p.set_defaults(out="models_out")

    p = command("localize", cmd_localize, "rank root-cause candidates for one incident")
    p.add_argument("--data", required=True, help="scenario directory or metric JSONL file")
    p.add_argument("--service", help="initial anomalous service")
    p.add_argument("--minute", type=int, help="incident minute")
    p.add_argument("--business-metric", help="business metric name")
    p.add_argument("--pruning-threshold", type=float)
    p.add_argument("--rt-model")
    p.add_argument("--ec-model")
    p.add_argument("--json", action="store_true", help="also print the JSON report")

    for name, func, help_text, preset in (
        ("evaluate", cmd_evaluate, "HR@k and MRR over simulated incidents", "noisy"),
        ("sweep", cmd_sweep, "pruning-threshold sweep", "sweep"),
    ):
        p = command(name, func, help_text)
        p.add_argument("--preset", default=preset)
        p.add_argument("--per-type", type=int, default=25, help="incidents per anomaly type")
        p.add_argument("--services", type=int, help="override the preset system size")
        p.add_argument("--pruning-threshold", type=float)
        p.add_argument("--rt-model")
        p.add_argument("--ec-model")
    p.add_argument("--thresholds", type=_floats, default=list(DEFAULT_THRESHOLDS))

    p = command("scale", cmd_scale, "localization time against system size")
    p.add_argument("--sizes", type=_ints, default=list(DEFAULT_SIZES))
    p.add_argument("--faults-per-size", type=int, default=12)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--preset", default="noisy")
    p.add_argument("--rt-model")
    p.add_argument("--ec-model")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CommandError, InvalidInput, ModelLoadError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
