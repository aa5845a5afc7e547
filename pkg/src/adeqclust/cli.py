"""Command-line interface: ``adeqclust {fit,select,calibrate,simulate,bench}``."""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from ._validation import DegenerateError
from .adequacy import select_clusters
from .io import (DataFormatError, emit_report, json_safe, load_csv, standardize_columns,
                 write_matrix_csv)
from .quality import DEFAULT_M_GRID, DEFAULT_REPS, CalibrationTable, calibrate, default_calibration
from .rimle import FitControl, otrimle_fit
from .simulation import METHODS, generate_dgp, run_benchmark, write_benchmark

EXIT_OK = 0
EXIT_NO_ADEQUATE = 3
EXIT_USAGE = 64
EXIT_DATAERR = 65
EXIT_NOINPUT = 66
EXIT_SOFTWARE = 70
EXIT_CANTCREAT = 73

THREADS_ENV = "ADEQCLUST_THREADS"

log = logging.getLogger("adeqclust")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def default_threads():
    env = os.environ.get(THREADS_ENV)
    if env:
        return int(env)
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def _add_data_args(p):
    p.add_argument("--input", required=True, help="CSV data file")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--header", action="store_true", help="first line is a header")
    p.add_argument("--standardize", action=argparse.BooleanOptionalAction, default=True,
                   help="scale columns to mean 0, sample variance 1 (default: on)")


def _add_fit_args(p):
    p.add_argument("--beta", type=float, default=0.0, help="noise penalty in the delta objective")
    p.add_argument("--gamma", type=float, default=20.0, help="eigenvalue ratio bound")
    p.add_argument("--noise-cap", type=float, default=0.5)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--delta-grid", type=_float_list, default=None,
                   help="comma-separated ascending noise levels (must include 0)")
    p.add_argument("--seed", type=int, required=True)


def build_parser():
    parser = _Parser(prog="adeqclust", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit the noise mixture for a fixed number of clusters")
    _add_data_args(p)
    _add_fit_args(p)
    p.add_argument("--G", type=int, required=True)
    p.add_argument("--output", required=True, help="JSON output; labels go to <stem>_labels.csv")

    p = sub.add_parser("select", help="choose the number of clusters by bootstrap adequacy")
    _add_data_args(p)
    _add_fit_args(p)
    p.add_argument("--output", required=True, help="JSON report; plot data next to it")
    p.add_argument("--gmax", type=int, default=10)
    p.add_argument("--B", type=int, default=100, help="bootstrap replicates per G")
    p.add_argument("--c", type=float, default=2.0, help="adequacy cutoff")
    p.add_argument("--p0", type=float, default=0.05, help="noise traded for one extra cluster")
    p.add_argument("--threads", type=int, default=None, help=f"default: ${THREADS_ENV} or all CPUs")
    p.add_argument("--calibration-file", default=None)
    p.add_argument("--early-stop", action="store_true")

    p = sub.add_parser("calibrate", help="regenerate the Gaussian reference moments")
    p.add_argument("--output", required=True)
    p.add_argument("--reps", type=int, default=DEFAULT_REPS)
    p.add_argument("--m-grid", type=_int_list, default=list(DEFAULT_M_GRID))
    p.add_argument("--seed", type=int, required=True)

    p = sub.add_parser("simulate", help="write a simulated data set")
    p.add_argument("--dgp", type=int, choices=[1, 2, 3, 4], required=True)
    p.add_argument("--dgp-spec", default=None, help="JSON component spec overriding the default")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--output", required=True)

    p = sub.add_parser("bench", help="run the simulation benchmark")
    p.add_argument("--dgp", type=_int_list, default=[1, 2, 3, 4])
    p.add_argument("--methods", default=",".join(METHODS))
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--gmax", type=int, default=10)
    p.add_argument("--B", type=int, default=30)
    p.add_argument("--c", type=float, default=2.0)
    p.add_argument("--p0", type=float, default=0.05)
    p.add_argument("--gamma", type=float, default=20.0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--calibration-file", default=None)
    p.add_argument("--output", required=True, help="CSV of runs; summary JSON next to it")
    return parser


def _read_data(args):
    X = load_csv(args.input, delimiter=args.delimiter, header=args.header)
    return standardize_columns(X) if args.standardize else X


def _control(args):
    if args.delta_grid is not None and 0.0 not in args.delta_grid:
        raise UsageError("--delta-grid must include 0")
    try:
        return FitControl(gamma=args.gamma, beta=args.beta, noise_cap=args.noise_cap,
                          n_restarts=args.restarts, delta_grid=args.delta_grid)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _table(path):
    return CalibrationTable.load(path) if path else default_calibration()


def cmd_fit(args):
    X = _read_data(args)
    fit = otrimle_fit(X, args.G, _control(args), np.random.default_rng(args.seed))
    out = Path(args.output)
    doc = {"G": args.G, "seed": args.seed, "params": fit.params.to_dict(),
           "discrepancy": fit.discrepancy, "noise_prop": fit.noise_prop,
           "pseudo_loglik": fit.pseudo_loglik, "delta_table": fit.delta_table}
    out.write_text(json.dumps(json_safe(doc), indent=1, sort_keys=True, allow_nan=False) + "\n")
    labels = out.with_name(out.stem + "_labels.csv")
    write_matrix_csv(labels, fit.posteriors, fit.labels(),
                     names=["p_noise"] + [f"p_{g}" for g in range(1, args.G + 1)])
    print(f"G={args.G} delta={fit.delta:.6g} noise={fit.noise_prop:.4f} D={fit.discrepancy:.4f}")
    return EXIT_OK


def cmd_select(args):
    for name in ("gmax", "B"):
        if getattr(args, name) < (2 if name == "B" else 1):
            raise UsageError(f"--{name} too small")
    if args.p0 <= 0:
        raise UsageError("--p0 must be positive")
    X = _read_data(args)
    threads = args.threads or default_threads()
    report = select_clusters(X, args.gmax, args.B, args.c, args.p0, _control(args),
                             _table(args.calibration_file), args.seed, n_jobs=threads,
                             early_stop=args.early_stop)
    paths = emit_report(report, args.output)
    for r in report.records:
        print(f"G={r.G:2d} Q={r.q_observed:9.4f} z={r.standardized:8.3f} "
              f"noise={r.noise_prop:.4f} S={r.simplicity:.3f} adequate={r.adequate}")
    if report.chosen_G is None:
        print(f"no adequate G <= {args.gmax}; best standardized score at G={report.fallback_G}")
        print("wrote " + ", ".join(map(str, paths)))
        return EXIT_NO_ADEQUATE
    print(f"chosen G={report.chosen_G}")
    print("wrote " + ", ".join(map(str, paths)))
    return EXIT_OK


def cmd_calibrate(args):
    try:
        table = calibrate(args.m_grid, args.reps, rng=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    table.save(args.output)
    print(f"wrote {args.output}")
    return EXIT_OK


def cmd_simulate(args):
    spec = json.loads(Path(args.dgp_spec).read_text()) if args.dgp_spec else None
    ds = generate_dgp(args.dgp, args.seed, spec)
    write_matrix_csv(args.output, ds.data, ds.labels)
    print(f"DGP {args.dgp}: n={ds.n} p={ds.p} G={ds.true_G} -> {args.output}")
    return EXIT_OK


def cmd_bench(args):
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if set(methods) - set(METHODS):
        raise UsageError(f"methods must be among {','.join(METHODS)}")
    settings = {"G_max": args.gmax, "B": args.B, "c": args.c, "p0": args.p0, "gamma": args.gamma}
    rows = run_benchmark(args.dgp, methods, args.runs, settings, args.seed,
                         n_jobs=args.threads or default_threads(),
                         table=_table(args.calibration_file))
    out = Path(args.output)
    summary = out.with_name(out.stem + "_summary.json")
    write_benchmark(rows, out, summary)
    print(summary.read_text())
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "select": cmd_select, "calibrate": cmd_calibrate,
            "simulate": cmd_simulate, "bench": cmd_bench}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"adeqclust: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"adeqclust: {exc}", file=sys.stderr)
        return EXIT_NOINPUT
    except DegenerateError as exc:
        print(f"adeqclust: {exc}", file=sys.stderr)
        return EXIT_SOFTWARE
    except (DataFormatError, ValueError) as exc:
        print(f"adeqclust: {exc}", file=sys.stderr)
        return EXIT_DATAERR
    except OSError as exc:
        print(f"adeqclust: {exc}", file=sys.stderr)
        return EXIT_CANTCREAT


if __name__ == "__main__":
    sys.exit(main())
