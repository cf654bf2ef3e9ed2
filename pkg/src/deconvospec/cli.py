"""Command-line interface: ``deconvospec {test,simulate,diagnose}``.

Exit codes: 0 on success, 2 for input or configuration errors, 3 for
numerical failures (the error class is named on stderr).
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import math
import os
import sys

import numpy as np

from .engine import TestConfig, run_test
from .error_model import Estimated, KnownGaussian, KnownLaplace
from .errors import DeconvoSpecError, InputShapeMismatch, UnstableDeconvolution
from .kernel import DeconvKernelSpec, bandwidth_rot, moment_table
from .projection import XiGrid
from .simulation import DgpSpec, run_table, simulate_dgp

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3
SEED_ENV = "DECONVOSPEC_SEED"
DEFAULT_VAR = 1.0 / 12.0


class InputError(Exception):
    """Bad command-line input; maps to exit code 2."""


def read_dataset(path):
    """Read ``y, w[, w_rep]`` columns from a CSV file with a header row.

    Rows with a missing or non-numeric field are rejected, naming the line.
    """
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise InputError(f"cannot open {path}: {exc.strerror}") from exc
    with fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        for col in ("y", "w"):
            if col not in header:
                raise InputError(f"{path}: missing column '{col}'")
        reader.fieldnames = header
        cols = ["y", "w"] + (["w_rep"] if "w_rep" in header else [])
        data = {c: [] for c in cols}
        bad = []
        for row in reader:
            try:
                vals = [float(row[c]) for c in cols]
            except (TypeError, ValueError):
                bad.append(reader.line_num)
                continue
            if not all(math.isfinite(v) for v in vals):
                bad.append(reader.line_num)
                continue
            for c, v in zip(cols, vals):
                data[c].append(v)
    if bad:
        shown = ", ".join(map(str, bad[:10])) + (" ..." if len(bad) > 10 else "")
        raise InputError(f"{path}: missing or non-numeric values on line(s) {shown}")
    if not data["y"]:
        raise InputError(f"{path}: no data rows")
    return {c: np.array(v) for c, v in data.items()}


def write_dataset(fh, y, w, w_rep=None):
    """CSV with 17 significant digits, enough to round-trip every double."""
    cols = ["y", "w"] + (["w_rep"] if w_rep is not None else [])
    arrays = [y, w] + ([w_rep] if w_rep is not None else [])
    fh.write(",".join(cols) + "\n")
    for row in zip(*arrays):
        fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError as exc:
        raise InputError(f"{SEED_ENV} must be an integer, got {env!r}") from exc


def _known_error(args):
    if args.error == "laplace":
        return KnownLaplace(args.lambda2) if args.lambda2 is not None else KnownLaplace.from_variance(DEFAULT_VAR)
    if args.error == "gaussian":
        return KnownGaussian(args.mu) if args.mu is not None else KnownGaussian.from_variance(DEFAULT_VAR)
    return "estimated"


def _add_error_flags(p):
    p.add_argument("--case", choices=("ordinary", "super"), default="ordinary")
    p.add_argument("--error", choices=("laplace", "gaussian", "estimated"), default="laplace")
    p.add_argument("--lambda2", type=float, help="Laplace squared scale (default: variance 1/12)")
    p.add_argument("--mu", type=float, help="Gaussian exponent coefficient (default: variance 1/12)")
    p.add_argument("--c", type=float, default=5.0, help="bandwidth constant")


def _add_xi_flags(p):
    p.add_argument("--xi-lo", type=float, default=-3.0)
    p.add_argument("--xi-hi", type=float, default=3.0)
    p.add_argument("--xi-n", type=int, default=31)
    p.add_argument(
        "--no-clip",
        action="store_true",
        help="use the xi grid as given instead of clipping it to the flat-top band",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deconvospec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="run the specification test on a CSV file")
    t.add_argument("--data", required=True, help="CSV with columns y, w and optionally w_rep")
    _add_error_flags(t)
    _add_xi_flags(t)
    t.add_argument("--B", type=int, default=199)
    t.add_argument("--alpha", type=float, action="append", help="significance level (repeatable)")
    t.add_argument("--fit-degree", type=int, default=1, choices=(1, 2))
    t.add_argument("--multiplier", choices=("mammen", "rademacher"), default="mammen")
    t.add_argument("--seed", type=int)
    t.add_argument("--out")
    t.add_argument("--format", choices=("text", "csv", "json-lines"), default="text")

    s = sub.add_parser("simulate", help="Monte Carlo rejection rates, or one simulated data set")
    s.add_argument("--table", help="1, 2, 3, 4 or a5..a12")
    s.add_argument("--reps", type=int, default=500)
    s.add_argument("--B", type=int, default=199)
    s.add_argument("--c", type=float, action="append", help="restrict the c grid (repeatable)")
    s.add_argument("--n", type=int, action="append", help="restrict the n grid (repeatable)")
    s.add_argument("--dgp", type=int, action="append", choices=(0, 1, 2), help="restrict the DGPs (repeatable)")
    s.add_argument("--fit-degree", type=int, default=1, choices=(1, 2))
    s.add_argument("--no-clip", action="store_true", help="do not clip the xi grid to the flat-top band")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.add_argument("--emit-data", metavar="FILE", help="write one simulated data set instead of running a table")
    s.add_argument("--error", choices=("laplace", "gaussian"), default="laplace", help="with --emit-data")
    s.add_argument("--repeated", action="store_true", help="with --emit-data: add a w_rep column")
    s.add_argument("--delta", type=float, default=0.5, help="with --emit-data")

    d = sub.add_parser("diagnose", help="dump the deconvolution kernel, moments and error CF")
    _add_error_flags(d)
    d.add_argument("--n", type=int, default=500, help="sample size for the bandwidth rule")
    d.add_argument("--b", type=float, help="bandwidth (overrides the rule of thumb)")
    d.add_argument("--data", help="CSV with w and w_rep (required for --error estimated)")
    d.add_argument("--what", choices=("kernel", "moments", "cf"), default="kernel")
    d.add_argument("--order", type=int, default=4)
    d.add_argument("--u-max", type=float, default=400.0)
    d.add_argument("--t-max", type=float, default=20.0)
    d.add_argument("--t-n", type=int, default=201)
    _add_xi_flags(d)
    d.add_argument("--out")
    return parser


@contextlib.contextmanager
def _output(path):
    if path is None:
        yield sys.stdout
    else:
        try:
            fh = open(path, "w", newline="")
        except OSError as exc:
            raise InputError(f"cannot write {path}: {exc.strerror}") from exc
        with fh:
            yield fh


def _xi(args) -> XiGrid:
    try:
        return XiGrid(args.xi_lo, args.xi_hi, args.xi_n)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def cmd_test(args) -> int:
    data = read_dataset(args.data)
    error = _known_error(args)
    if error == "estimated" and "w_rep" not in data:
        raise InputError(f"{args.data}: --error estimated needs column 'w_rep'")
    w_rep = data.get("w_rep") if error == "estimated" else None
    try:
        config = TestConfig(
            error=error,
            case=args.case,
            c=args.c,
            B=args.B,
            alphas=tuple(args.alpha) if args.alpha else (0.01, 0.05, 0.10),
            multiplier=args.multiplier,
            seed=_seed(args),
            xi=_xi(args),
            fit_degree=args.fit_degree,
            clip_to_flat=not args.no_clip,
        )
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    result = run_test(data["y"], data["w"], w_rep, config)

    with _output(args.out) as fh:
        if args.format == "text":
            for k, v in result.summary().items():
                fh.write(f"{k} = {_num(v)}\n")
        elif args.format == "csv":
            rows = result.records()
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            writer.writeheader()
            for r in rows:
                writer.writerow({k: _num(v) for k, v in r.items()})
        else:
            for r in result.records():
                fh.write(json.dumps(r, sort_keys=True) + "\n")
    return EXIT_OK


def _num(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


def cmd_simulate(args) -> int:
    seed = _seed(args)
    if args.emit_data:
        err = "laplace_var_1_12" if args.error == "laplace" else "gaussian_var_1_12"
        model = args.dgp[0] if args.dgp else 0
        n = args.n[0] if args.n else 500
        try:
            spec = DgpSpec(model=model, delta=args.delta, n=n, error=err, repeated=args.repeated, seed=seed)
        except ValueError as exc:
            raise InputError(str(exc)) from exc
        y, w, w_rep = simulate_dgp(spec)
        with _output(args.emit_data) as fh:
            write_dataset(fh, y, w, w_rep)
        return EXIT_OK
    if args.table is None:
        raise InputError("simulate needs --table (or --emit-data)")
    if args.reps < 1 or args.B < 1 or args.jobs < 1:
        raise InputError("--reps, --B and --jobs must be positive")
    try:
        report = run_table(
            args.table,
            reps=args.reps,
            B=args.B,
            c_list=args.c,
            n_list=args.n,
            dgps=args.dgp or (0, 1, 2),
            seed=seed,
            jobs=args.jobs,
            base_config=TestConfig(fit_degree=args.fit_degree, clip_to_flat=not args.no_clip),
            progress=lambda m: print(m, file=sys.stderr, flush=True),
        )
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    with _output(args.out) as fh:
        report.to_csv(fh)
    return EXIT_OK


def _diagnose_model(args):
    error = _known_error(args)
    if error != "estimated":
        return error
    if args.data is None:
        raise InputError("--error estimated needs --data with columns w and w_rep")
    data = read_dataset(args.data)
    if "w_rep" not in data:
        raise InputError(f"{args.data}: --error estimated needs column 'w_rep'")
    return Estimated.from_repeated(data["w"], data["w_rep"])


def cmd_diagnose(args) -> int:
    model = _diagnose_model(args)
    with _output(args.out) as fh:
        if args.what == "cf":
            fh.write("t,cf\n")
            for t in np.linspace(-args.t_max, args.t_max, args.t_n):
                fh.write(f"{t:.17g},{float(model.cf(t)):.17g}\n")
            return EXIT_OK
        sigma2 = model.sigma2
        if args.b is not None:
            b = args.b
        elif sigma2 > 0:
            b = bandwidth_rot(args.case, sigma2, args.n, args.c)
        else:
            b = 1.0
        if not b > 0:
            raise InputError("--b must be positive")
        spec = DeconvKernelSpec(b, model, u_trunc=args.u_max, max_order=args.order)
        if args.what == "kernel":
            u, k = spec.kernel_on_grid()
            fh.write("u,K_eps\n")
            for ui, ki in zip(u, k):
                fh.write(f"{ui:.17g},{ki:.17g}\n")
        else:
            xi = _xi(args)
            xi = xi if args.no_clip else xi.clipped(b)
            table = moment_table(spec, xi.nodes, order=args.order)
            fh.write("l,xi,re,im\n")
            for l in range(table.order + 1):
                fh.write(f"{l},0,{table.at_zero[l]:.17g},0\n")
                for x, m in zip(table.xi_grid, table.values[l]):
                    fh.write(f"{l},{x:.17g},{m.real:.17g},{m.imag:.17g}\n")
    return EXIT_OK


COMMANDS = {"test": cmd_test, "simulate": cmd_simulate, "diagnose": cmd_diagnose}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (InputError, InputShapeMismatch, ValueError) as exc:
        # library ValueErrors are configuration problems (bad order, grid, ...)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except UnstableDeconvolution as exc:
        where = f" at t={exc.t:g}" if getattr(exc, "t", None) is not None else ""
        print(f"UnstableDeconvolution{where}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DeconvoSpecError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
