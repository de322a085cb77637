"""Regenerate the detector models bundled under chainrca/data/models."""

import argparse
import json
import time

from chainrca.simulator.corpus import CorpusConfig, default_corpus
from chainrca.training import TrainConfig, default_model_paths, format_report, heldout_report, train_models, write_models


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=None, help="output directory (default: the package data directory)")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    t0 = time.perf_counter()
    corpus = default_corpus(CorpusConfig(seed=args.seed))
    cfg = TrainConfig(seed=args.seed)
    rt, ec = train_models(corpus, cfg)
    report = heldout_report(corpus, rt, ec)
    out = args.out or default_model_paths()[0].parent
    write_models(out, rt, ec, report, cfg)
    print(format_report(report))
    print(json.dumps({"out": str(out), "seconds": round(time.perf_counter() - t0, 1)}))


if __name__ == "__main__":
    main()
