#!/usr/bin/env python3
"""Compare LP feasibility of the martingale constraints with the potential-function order test.

    python3 scripts/strassen_check.py [--pairs 200] [--seed 0]
"""
import argparse

import numpy as np

from motlab.measures import DiscreteMeasure, MeasurePair, check_convex_order, quantize
from motlab.mot import is_martingale_feasible


def random_measure(rng, max_atoms=12):
    k = int(rng.integers(1, max_atoms + 1))
    return DiscreteMeasure(rng.uniform(-2, 2, k), rng.dirichlet(np.ones(k)))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pairs", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    counts = {}
    for k in range(args.pairs):
        if k % 2:
            parent = random_measure(rng)
            pair = MeasurePair(quantize(parent, int(rng.integers(1, 5))), quantize(parent, 12))
        else:
            a, b = random_measure(rng), random_measure(rng)
            pair = MeasurePair(a, DiscreteMeasure(b.atoms - b.mean + a.mean, b.weights))
        key = (check_convex_order(pair.mu1, pair.mu2).holds, is_martingale_feasible(pair))
        counts[key] = counts.get(key, 0) + 1
    for (order, lp), n in sorted(counts.items()):
        print(f"order={order!s:<5} lp_feasible={lp!s:<5} {n}")
    disagree = sum(n for (o, f), n in counts.items() if o != f)
    print(f"disagreements: {disagree}")
    raise SystemExit(1 if disagree else 0)


if __name__ == "__main__":
    main()
