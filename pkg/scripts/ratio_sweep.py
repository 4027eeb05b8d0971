#!/usr/bin/env python3
"""Accuracy of each approach as the fraction of attacked modules varies.

Ratio 0 makes every iteration a true-negative opportunity, so this sweep is
the only place false positives show up under the any-attacker ground truth.
"""

import argparse
import csv

from consensus_nids.dataset import generate_synthetic, split
from consensus_nids.simulator import APPROACHES, SimulationConfig, TopologySpec, run_simulation


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--side", type=int, default=5)
    p.add_argument("--ratios", nargs="+", type=float, default=[0.0, 0.2, 0.4, 0.6, 0.8, 1.0])
    p.add_argument("--rounds", type=int, default=500)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="ratio_sweep.csv")
    args = p.parse_args(argv)

    train, test = split(generate_synthetic(args.seed, 2000, 0.5), 0.7, args.seed)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ratio", *(f"accuracy_{a}" for a in APPROACHES), "disagreement_iterations"])
        for ratio in args.ratios:
            cfg = SimulationConfig(topology=TopologySpec("torus", side=args.side), ratio=ratio,
                                   rounds=args.rounds, tau=args.tau, seed=args.seed)
            report = run_simulation(cfg, train, test)
            s = report.summary()
            writer.writerow([ratio, *(repr(s["accuracy"][a]) for a in APPROACHES),
                             s["disagreement_iterations"]])
            print(f"ratio {ratio:.2f}: " + "  ".join(f"{a} {s['accuracy'][a]:.4f}" for a in APPROACHES))


if __name__ == "__main__":
    main()
