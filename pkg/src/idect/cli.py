"""Command-line front end.

    idect solve FILE [--out sol.csv] [--grid M]
    idect converge FILE [--ns 16,32,64] (--exact EXPR | --self-ref) [--n-ref N]
    idect spy FILE [--n N]
    idect eval COEFFS [--points t1,t2,...] [--T T]

Exit status: 0 on success, 1 on input errors, 2 when the solver fails.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import warnings

import numpy as np

from .approx import Domain, LegendreSeries
from .errors import DomainError, ExpressionError, IdectError, MaxNReached, ProblemFileError
from .problemfile import load_problem, read_coefficients
from .solver import SOLVER_TOL, assemble, convergence_study, solve, spy_pattern

EXIT_OK, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2
DEFAULT_NS = "16,32,64,128,256,512,1024"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _fmt(v) -> str:
    return "%.17g" % v


def _write_rows(path, header, rows):
    fh = open(path, "w", newline="") if path else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) if isinstance(x, float) else x for x in row])
    finally:
        if path:
            fh.close()


def _sidecar(path: str) -> str:
    root, ext = os.path.splitext(path)
    return f"{root}.coeffs{ext or '.csv'}"


def _tolerance(spec, args) -> float:
    if getattr(args, "tol", None) is not None:
        return args.tol
    if spec.tol != SOLVER_TOL:
        return spec.tol
    env = os.environ.get("IDECT_TOL")
    if env:
        try:
            tol = float(env)
        except ValueError:
            raise ProblemFileError(f"IDECT_TOL is not a number: {env!r}") from None
        if not tol > 0:
            raise ProblemFileError(f"IDECT_TOL must be positive, got {env!r}")
        return tol
    return spec.tol


def _parse_floats(text: str, what: str) -> list:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ProblemFileError(f"{what} must be comma-separated numbers, got {text!r}") from None


def cmd_solve(args) -> int:
    spec = load_problem(args.file)
    tol = _tolerance(spec, args)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", MaxNReached)
        sol = solve(spec.problem, tol=tol, N_min=spec.n_min, N_max=spec.n_max)
    if args.grid < 2:
        raise ProblemFileError("--grid needs at least 2 points")
    t = np.linspace(0.0, spec.problem.domain.T, args.grid)
    y = sol.y(t)
    _write_rows(args.out, ["t", "y"], zip(t.tolist(), y.tolist()))
    _write_rows(_sidecar(args.out), ["n", "c_n"], enumerate(sol.y.coeffs.tolist()))
    lo, up = sol.diagnostics["bandwidths"]
    print(f"N_used     {sol.N_used}")
    print(f"bandwidths {lo} {up}")
    print(f"residual   {sol.residual:.3e}")
    print(f"trailing   {sol.diagnostics['trailing']:.3e}")
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    return EXIT_OK if sol.converged else EXIT_SOLVER


def cmd_converge(args) -> int:
    spec = load_problem(args.file)
    if (args.exact is None) == (not args.self_ref):
        raise ProblemFileError("give exactly one of --exact and --self-ref")
    ns = [int(n) for n in _parse_floats(args.ns, "--ns")]
    if not ns or min(ns) <= spec.problem.order:
        raise ProblemFileError(f"--ns values must exceed the order {spec.problem.order}")
    rows = convergence_study(spec.problem, ns, exact=args.exact, n_ref=args.n_ref, tol=_tolerance(spec, args))
    _write_rows(args.out, ["N", "max_error"], [(r["N"], r["max_error"]) for r in rows])
    return EXIT_OK


def cmd_spy(args) -> int:
    spec = load_problem(args.file)
    if args.n <= spec.problem.order:
        raise ProblemFileError(f"--n must exceed the order {spec.problem.order}")
    M, _ = assemble(spec.problem, args.n, tol=_tolerance(spec, args))
    _write_rows(args.out, ["row", "col"], spy_pattern(M))
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        coeffs = read_coefficients(args.file)
    except (OSError, ValueError) as exc:
        raise ProblemFileError(str(exc), args.file) from exc
    if not args.T > 0:
        raise ProblemFileError(f"--T must be positive, got {args.T!r}")
    series = LegendreSeries(Domain(args.T), coeffs)
    pts = _parse_floats(args.points, "--points")
    for t in pts:
        if not 0.0 <= t <= args.T:
            raise DomainError(f"point {t!r} lies outside [0, {args.T!r}]")
    vals = series(np.array(pts)) if pts else []
    for t, v in zip(pts, vals):
        print(f"{_fmt(t)},{_fmt(v)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="idect", description="Spectral solver for convolution integro-differential equations.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="solve and sample on a grid")
    s.add_argument("file")
    s.add_argument("--out", default="sol.csv")
    s.add_argument("--grid", type=int, default=1000)
    s.add_argument("--tol", type=float)
    s.set_defaults(func=cmd_solve)

    c = sub.add_parser("converge", help="error against a reference for several N")
    c.add_argument("file")
    c.add_argument("--ns", default=DEFAULT_NS)
    c.add_argument("--exact")
    c.add_argument("--self-ref", action="store_true")
    c.add_argument("--n-ref", type=int)
    c.add_argument("--out")
    c.add_argument("--tol", type=float)
    c.set_defaults(func=cmd_converge)

    y = sub.add_parser("spy", help="nonzero pattern of the discretization")
    y.add_argument("file")
    y.add_argument("--n", type=int, default=60)
    y.add_argument("--out")
    y.add_argument("--tol", type=float)
    y.set_defaults(func=cmd_spy)

    e = sub.add_parser("eval", help="evaluate a coefficient file")
    e.add_argument("file")
    e.add_argument("--points", default="")
    e.add_argument("--T", type=float, default=1.0)
    e.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ProblemFileError, ExpressionError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except IdectError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
