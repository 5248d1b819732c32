"""Command-line front end for the experiment harness."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .harness import (
    METHODS,
    ExperimentConfig,
    load_config_file,
    run_measurement_sweep,
    run_snr_sweep,
    selftest,
    single_run,
    write_csv,
    write_trace_csv,
)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file; flags override it")
    p.add_argument("--seed", type=int, default=None, help="master seed (u64)")
    p.add_argument("--trials", type=int, default=None, help="Monte-Carlo trial count")
    p.add_argument("--methods", default=None, help=f"comma list from {','.join(METHODS)}")
    p.add_argument("--out", default=None, help="output CSV path")
    p.add_argument("--snr-db", dest="snr_db", default=None, help="comma list of SNRs in dB")
    p.add_argument("--budgets", default=None, help="comma list of measurement budgets")
    p.add_argument("--workers", type=int, default=None, help="parallel trial workers")
    p.add_argument("-v", "--verbose", action="store_true", help="info-level logging")


def _build_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if args.config:
        cfg = load_config_file(args.config, cfg)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.methods is not None:
        overrides["methods"] = tuple(s.strip() for s in args.methods.split(",") if s.strip())
    if args.out is not None:
        overrides["out"] = args.out
    if args.snr_db is not None:
        overrides["snr_db"] = tuple(float(s) for s in args.snr_db.split(","))
    if args.budgets is not None:
        overrides["budgets"] = tuple(int(s) for s in args.budgets.split(","))
    if args.workers is not None:
        overrides["workers"] = args.workers
    return replace(cfg, **overrides)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="beamopt",
        description="Beam-alignment benchmark: Bayesian optimization vs sweep/OMP/bandit baselines",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_meas = sub.add_parser(
        "sweep-measurements", help="normalized SE vs measurement budget at one SNR"
    )
    _add_common(p_meas)

    p_snr = sub.add_parser("sweep-snr", help="normalized SE vs SNR at one budget")
    _add_common(p_snr)

    p_single = sub.add_parser("single-run", help="one method, one channel, full trace CSV")
    _add_common(p_single)
    p_single.add_argument("--method", required=True, help=f"one of {','.join(METHODS)}")
    p_single.add_argument("--budget", type=int, default=160, help="measurement budget")
    p_single.add_argument("--trial", type=int, default=0, help="trial index (channel draw)")

    p_self = sub.add_parser("selftest", help="run the built-in oracle checks")
    p_self.add_argument("-v", "--verbose", action="store_true")

    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )

    if args.command == "selftest":
        return 1 if selftest(verbose=True) else 0

    try:
        cfg = _build_config(args)
        if args.command == "sweep-measurements":
            points = run_measurement_sweep(cfg)
            write_csv(points, cfg.out)
            print(f"wrote {len(points)} points to {cfg.out}")
            return 0
        if args.command == "sweep-snr":
            if args.budgets is None and len(cfg.budgets) != 1:
                cfg = replace(cfg, budgets=(160,))
            points = run_snr_sweep(cfg)
            write_csv(points, cfg.out)
            print(f"wrote {len(points)} points to {cfg.out}")
            return 0
        # single-run
        trace = single_run(cfg, args.method, args.budget, args.trial)
        write_trace_csv(trace, cfg.out)
        print(f"wrote {len(trace)} trace rows to {cfg.out}")
        return 0
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
