"""Command-line interface: fit, cv, bench, and consistency subcommands.

Exit codes: 0 success, 1 input error, 2 fit reported but not converged,
64 usage error. All commands are deterministic given --seed; wall-clock
timings appear only in columns documented as excluded from determinism
comparisons.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .batch import BatchConfig, fit_batch
from .bench import (ALGORITHMS, SCENARIOS, BenchSettings, replicates_to_csv,
                    run_benchmark, summary_to_csv)
from .cavi import ComponentwiseConfig, fit_componentwise
from .exceptions import SsvbError
from .inference import fit_result_to_json
from .model import Hyperparameters, load_csv, standardize
from .tuning import CvConfig, cv_select_v1, cv_table_to_csv
from . import consistency

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NOT_CONVERGED = 2
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    """argparse with the scripting-friendly usage exit code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number")
    if not value > 0:
        raise argparse.ArgumentTypeError(f"{text!r} must be positive")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer")
    if value < 1:
        raise argparse.ArgumentTypeError(f"{text!r} must be >= 1")
    return value


def _v1_or_cv(text: str):
    if text == "cv":
        return "cv"
    return _positive_float(text)


def _grid(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("grid must be comma-separated "
                                         "numbers")
    if not values or any(v <= 0 for v in values):
        raise argparse.ArgumentTypeError("grid values must be positive")
    return values


def _int_list(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated integers")
    if not values or any(v < 2 for v in values):
        raise argparse.ArgumentTypeError("values must be >= 2")
    return values


def _default_threads() -> int:
    env = os.environ.get("SSVB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _add_prior_flags(p: argparse.ArgumentParser):
    p.add_argument("--nu", type=_positive_float, default=1.0)
    p.add_argument("--lam", type=_positive_float, default=1.0)
    p.add_argument("--a0", type=_positive_float, default=1.0)
    p.add_argument("--b0", type=_positive_float, default=1.0)
    p.add_argument("--truncation", type=float, default=1e-3,
                   help="bound c restricting phi to [c, 1-c]")


def build_parser() -> _Parser:
    parser = _Parser(prog="ssvb",
                     description="Spike-and-slab variational Bayes for "
                                 "sparse linear regression")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", parents=[], help="fit one CSV dataset")
    fit.add_argument("--input", required=True)
    fit.add_argument("--output", required=True)
    fit.add_argument("--algorithm", choices=("alg1", "alg2"), default="alg2")
    fit.add_argument("--v1", type=_positive_float, default=1.0)
    fit.add_argument("--max-iters", type=_positive_int, default=200)
    fit.add_argument("--entropy-tol", type=_positive_float, default=1e-5)
    fit.add_argument("--an-policy", choices=("fixed_n", "min_nonzero_eigen"),
                     default="fixed_n")
    fit.add_argument("--woodbury", action="store_true")
    _add_prior_flags(fit)

    cv = sub.add_parser("cv", help="cross-validate v1 on a CSV dataset")
    cv.add_argument("--input", required=True)
    cv.add_argument("--output", required=True)
    cv.add_argument("--algorithm", choices=("alg1", "alg2"), default="alg2")
    cv.add_argument("--folds", type=_positive_int, default=5)
    cv.add_argument("--grid", type=_grid, default=None)
    cv.add_argument("--scoring", choices=("sparse", "two_stage"),
                    default="sparse")
    cv.add_argument("--seed", type=int, default=0)
    _add_prior_flags(cv)

    bench = sub.add_parser("bench", help="run a simulation scenario")
    bench.add_argument("--scenario", choices=SCENARIOS, required=True)
    bench.add_argument("--n", type=_positive_int, default=60)
    bench.add_argument("--sigma", type=_positive_float, default=1.0)
    bench.add_argument("--reps", type=_positive_int, default=100)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--v1", type=_v1_or_cv, default="cv",
                       help="fixed value or 'cv'")
    bench.add_argument("--algorithms", default="componentwise,batch")
    bench.add_argument("--woodbury", action="store_true")
    bench.add_argument("--an-policy", choices=("fixed_n", "min_nonzero_eigen"),
                       default="fixed_n")
    bench.add_argument("--output", required=True,
                       help="prefix; writes <prefix>_replicates.csv and "
                            "<prefix>_summary.csv")
    bench.add_argument("--threads", type=_positive_int,
                       default=_default_threads())

    cons = sub.add_parser("consistency", help="run a trend experiment")
    cons.add_argument("--experiment", choices=("gap", "bayes"),
                      required=True)
    cons.add_argument("--n-grid", type=_int_list, default=(200, 800, 3200))
    cons.add_argument("--reps", type=_positive_int, default=100)
    cons.add_argument("--seed", type=int, default=0)
    cons.add_argument("--sigma", type=_positive_float, default=3.0,
                      help="noise sd for the bayes experiment")
    cons.add_argument("--v1", type=_positive_float, default=1.0,
                      help="slab scale for the bayes experiment")
    cons.add_argument("--output", required=True)
    cons.add_argument("--threads", type=_positive_int,
                      default=_default_threads())
    return parser


def cmd_fit(args) -> int:
    try:
        raw = load_csv(args.input)
        hp = Hyperparameters(v1=args.v1, nu=args.nu, lam=args.lam,
                             a0=args.a0, b0=args.b0, c=args.truncation,
                             an_policy=args.an_policy)
        data = standardize(raw)
        if args.algorithm == "alg1":
            fit = fit_componentwise(data, hp, ComponentwiseConfig(
                max_sweeps=args.max_iters, entropy_tol=args.entropy_tol))
        else:
            fit = fit_batch(data, hp, BatchConfig(
                max_iters=args.max_iters, entropy_tol=args.entropy_tol,
                woodbury=args.woodbury))
    except (SsvbError, ValueError, OSError) as exc:
        print(f"ssvb fit: {exc}", file=sys.stderr)
        return EXIT_INPUT
    text = fit_result_to_json(fit, hp, raw.names())
    with open(args.output, "w", encoding="utf-8") as fh:
        fh.write(text + "\n")
    if not fit.converged:
        print("ssvb fit: not converged within iteration budget",
              file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_cv(args) -> int:
    try:
        raw = load_csv(args.input)
        hp = Hyperparameters(nu=args.nu, lam=args.lam, a0=args.a0,
                             b0=args.b0, c=args.truncation)
        kwargs = {"folds": args.folds, "scoring": args.scoring,
                  "seed": args.seed}
        if args.grid is not None:
            kwargs["v1_grid"] = args.grid
        cfg = CvConfig(**kwargs)
        algorithm = "componentwise" if args.algorithm == "alg1" else "batch"
        best_v1, table = cv_select_v1(raw, hp, cfg, algorithm=algorithm)
    except (SsvbError, ValueError, OSError) as exc:
        print(f"ssvb cv: {exc}", file=sys.stderr)
        return EXIT_INPUT
    with open(args.output, "w", encoding="utf-8") as fh:
        fh.write(cv_table_to_csv(table))
    print(f"best_v1={best_v1!r}")
    return EXIT_OK


def cmd_bench(args) -> int:
    try:
        algorithms = tuple(a.strip() for a in args.algorithms.split(",")
                           if a.strip())
        for a in algorithms:
            if a not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {a!r}")
        settings = BenchSettings(
            scenario=args.scenario, n=args.n, sigma=args.sigma,
            seed=args.seed, v1=args.v1, algorithms=algorithms,
            woodbury=args.woodbury,
            an_policy=args.an_policy)
        replicate_rows, summary_rows, failures = run_benchmark(
            settings, args.reps, threads=args.threads)
    except (SsvbError, ValueError, OSError) as exc:
        print(f"ssvb bench: {exc}", file=sys.stderr)
        return EXIT_INPUT
    with open(f"{args.output}_replicates.csv", "w", encoding="utf-8") as fh:
        fh.write(replicates_to_csv(replicate_rows))
    with open(f"{args.output}_summary.csv", "w", encoding="utf-8") as fh:
        fh.write(summary_to_csv(summary_rows))
    for rep, msg in sorted(failures.items()):
        print(f"ssvb bench: replicate {rep} failed: {msg}", file=sys.stderr)
    return EXIT_OK


def cmd_consistency(args) -> int:
    try:
        if args.experiment == "gap":
            rows = consistency.gap_experiment(args.n_grid, reps=args.reps,
                                              seed=args.seed)
        else:
            rows = consistency.bayesian_consistency_experiment(
                args.n_grid, reps=args.reps, seed=args.seed,
                sigma=args.sigma, v1=args.v1)
    except (SsvbError, ValueError, OSError) as exc:
        print(f"ssvb consistency: {exc}", file=sys.stderr)
        return EXIT_INPUT
    with open(args.output, "w", encoding="utf-8") as fh:
        fh.write(consistency.rows_to_csv(rows))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"fit": cmd_fit, "cv": cmd_cv, "bench": cmd_bench,
                "consistency": cmd_consistency}
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
