"""Pruning-threshold sweep on the sweep preset, written under results/sweep."""

import argparse
import sys

from chainrca.cli import main as cli


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/sweep")
    ap.add_argument("--per-type", type=int, default=25)
    ap.add_argument("--thresholds", default="0,0.3,0.5,0.7,0.9")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    sys.exit(cli(["sweep", "--per-type", str(args.per_type), "--thresholds", args.thresholds,
                  "--seed", str(args.seed), "--out", args.out]))


if __name__ == "__main__":
    main()
