#!/usr/bin/env python3
"""Run the three stability sweeps on seeded common-parent bases and print terminal gaps.

    python3 scripts/run_stability_suite.py [--bases 10] [--seed 2024] [--out DIR]

With --out, every report is also written as CSV (one file per base and sweep).
"""
import argparse
from pathlib import Path

import numpy as np

from motlab import stability
from motlab.mot import MotProblem, solve_mot
from motlab.stability import PerturbationScheme

PHI = "abs(x2 - x1)"
LEVELS = (4, 8, 16, 32, 64)
SIGMAS = (0.5, 0.25, 0.1, 0.01, 0.001)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--bases", type=int, default=10)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--out", type=Path)
    args = ap.parse_args()
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(args.seed)
    quant = PerturbationScheme("quantile_resolution", LEVELS)
    mix = PerturbationScheme("mixture_shift", SIGMAS)
    print(f"{'base':>4} {'m(base)':>10} {'quant':>5} {'value':>10} {'lower':>10} {'set':>10} {'face':>10}")
    for k in range(args.bases):
        base = stability.common_parent_pair(rng)
        reports = {
            "quantile": stability.value_continuity_sweep(base, PHI, quant),
            "value": stability.value_continuity_sweep(base, PHI, mix),
            "lower": stability.lower_hemi_sweep(base, solve_mot(MotProblem(base, PHI)).optimizer, mix),
            "upper": stability.upper_hemi_sweep(base, PHI, mix),
        }
        last = {name: r.rows[-1] for name, r in reports.items()}
        print(f"{k:>4} {reports['value'].reference_value:>10.6f} "
              f"{'ok' if reports['quantile'].passed else 'FAIL':>5} "
              f"{last['value'].value_gap:>10.3e} {last['lower'].lower_hemi_dist:>10.3e} "
              f"{last['upper'].upper_hemi_dist:>10.3e} {last['upper'].face_dist:>10.3e}")
        if args.out:
            for name, r in reports.items():
                (args.out / f"base{k}_{name}.csv").write_bytes(stability.emit_report(r, "csv"))


if __name__ == "__main__":
    main()
