#!/usr/bin/env python3
"""Normalized spectral efficiency versus SNR at 160 measurements.

Reference configuration: 64x16 arrays, matched DFT codebooks, 5 paths,
SNR -15..5 dB, 200 channel draws.
"""

import argparse

from beamopt.harness import ExperimentConfig, run_snr_sweep, write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="snr_sweep.csv")
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=None)
    args = ap.parse_args()

    cfg = ExperimentConfig(
        snr_db=(-15.0, -10.0, -5.0, 0.0, 5.0),
        budgets=(160,),
        trials=args.trials,
        seed=args.seed,
        workers=args.workers,
        out=args.out,
    )
    points = run_snr_sweep(cfg)
    write_csv(points, cfg.out)
    print(f"wrote {len(points)} points to {cfg.out}")


if __name__ == "__main__":
    main()
