#!/usr/bin/env python3
"""Run the figure presets (2-6) and write one study.csv per figure.

    python scripts/reproduce_figures.py --out results --rounds 1000
    python scripts/reproduce_figures.py --figs 2 3 --rounds 200 --sizes 9 25 49
"""

import argparse
import csv
import sys
from pathlib import Path

from consensus_nids.cli import main as cli_main


def summarize(path: Path) -> None:
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        print(f"  {r['topology']:<18} {r['scheme']:<14} rounds {float(r['mean_rounds']):9.2f}  "
              f"acc cons/hier {float(r['accuracy_consensus']):.4f}/"
              f"{float(r['accuracy_hierarchical']):.4f}")


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--figs", nargs="+", default=["2", "3", "4", "5", "6"])
    p.add_argument("--sizes", nargs="+", default=["9", "25", "49", "81", "121"])
    p.add_argument("--rounds", default="1000")
    p.add_argument("--seed", default="0")
    p.add_argument("--out", default="results")
    args = p.parse_args(argv)

    for fig in args.figs:
        out = Path(args.out) / f"fig{fig}"
        code = cli_main(["study", "--figs", fig, "--sizes", *args.sizes, "--rounds", args.rounds,
                         "--seed", args.seed, "--synthetic", "--out", str(out)])
        if code:
            return code
        print(f"fig {fig}:")
        summarize(out / "study.csv")
    return 0


if __name__ == "__main__":
    sys.exit(main())
