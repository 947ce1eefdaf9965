#!/usr/bin/env python3
"""Generate a synthetic NER dataset (CoNLL splits, vectors, stopwords).

The corpus is built from templated sentences over three entity types, so a
small model can learn it quickly; it is the workbench for the experiment
scripts and the acceptance suite.

Usage:
    python3 scripts/make_synthetic_data.py --out data/synth --train 200
"""

import argparse

from metaner.synthetic import write_synthetic_dataset


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--train", type=int, default=200, help="training sentences")
    ap.add_argument("--dev", type=int, default=50, help="dev sentences")
    ap.add_argument("--test", type=int, default=50, help="test sentences")
    ap.add_argument("--dim", type=int, default=12, help="word vector dimension")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    paths = write_synthetic_dataset(
        args.out,
        train=args.train,
        dev=args.dev,
        test=args.test,
        seed=args.seed,
        dim=args.dim,
    )
    for name, path in paths.items():
        print(f"{name}: {path}")


if __name__ == "__main__":
    main()
