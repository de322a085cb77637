"""HR@k and MRR on the noise-free and noisy presets, written under results/."""

import argparse
import sys

from chainrca.cli import main as cli


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results")
    ap.add_argument("--per-type", type=int, default=25)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    for preset in ("noise_free", "noisy"):
        print(f"== {preset}")
        rc = cli(["evaluate", "--preset", preset, "--per-type", str(args.per_type), "--seed", str(args.seed),
                  "--out", f"{args.out}/{preset}"])
        if rc:
            sys.exit(rc)


if __name__ == "__main__":
    main()
