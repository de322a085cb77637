"""Localization time against system size, written under results/scaling."""

import argparse
import sys

from chainrca.cli import main as cli


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/scaling")
    ap.add_argument("--sizes", default="100,250,500,1000,2000")
    ap.add_argument("--faults-per-size", type=int, default=12)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    sys.exit(cli(["scale", "--sizes", args.sizes, "--faults-per-size", str(args.faults_per_size),
                  "--seed", str(args.seed), "--out", args.out]))


if __name__ == "__main__":
    main()
