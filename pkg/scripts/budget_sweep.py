#!/usr/bin/env python3
"""Normalized spectral efficiency versus measurement count at 0 dB SNR.

Reference configuration: 64x16 arrays, matched DFT codebooks, 5 paths,
budgets 16..160, 200 channel draws. Writes budget_sweep.csv next to the
chosen output directory; every column is plotting-ready.
"""

import argparse

from beamopt.harness import ExperimentConfig, run_measurement_sweep, write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="budget_sweep.csv")
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=None)
    args = ap.parse_args()

    cfg = ExperimentConfig(
        snr_db=(0.0,),
        budgets=tuple(range(16, 161, 16)),
        trials=args.trials,
        seed=args.seed,
        workers=args.workers,
        out=args.out,
    )
    points = run_measurement_sweep(cfg)
    write_csv(points, cfg.out)
    print(f"wrote {len(points)} points to {cfg.out}")


if __name__ == "__main__":
    main()
