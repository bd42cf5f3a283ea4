"""Sectioned text format for problem descriptions.

Example::

    [domain]
    T = 1

    [equation]
    order = 1
    coeff_0 = 100
    coeff_1 = 1
    kind = volterra
    kernel = exp(-u)
    rhs = 0

    [constraints]
    eval 0 = 1

    [solver]
    tol = 1e-13

Expressions are parsed by :mod:`idect.funcparse`.  ``rhs`` may also be
``file:<path>``, a list of Legendre coefficients (one per line, optionally
as ``n,c_n`` with a header), resolved relative to the problem file.
"""

from __future__ import annotations

import configparser
import csv
import os
import re
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .approx import Domain, LegendreSeries
from .errors import ExpressionError, ProblemFileError
from .funcparse import compile_expr, eval_expr, is_constant
from .solver import KINDS, SOLVER_TOL, ConstraintRow, IdeProblem

__all__ = ["ProblemSpec", "load_problem", "parse_problem", "read_coefficients"]

_SECTIONS = {
    "domain": {"T"},
    "equation": {"order", "kind", "kernel", "g", "h", "sign", "rhs"},
    "constraints": set(),
    "solver": {"tol", "n_min", "n_max"},
}
_COEFF = re.compile(r"coeff_(\d+)$")
_LOWRANK = re.compile(r"lowrank_(\d+)$")
_CONSTRAINT = re.compile(r"(eval|deriv)\s+(\S+)$|mean$")


@dataclass(frozen=True)
class ProblemSpec:
    """A parsed problem file: the problem plus its solver settings."""

    problem: IdeProblem
    tol: float = SOLVER_TOL
    n_min: int = 32
    n_max: int = 4096
    source: Optional[str] = None


class _Located:
    """Maps (section, key) to a ``file:line`` string for error messages."""

    def __init__(self, text: str, name: str):
        self.name = name
        self.lines = {}
        section = None
        for no, line in enumerate(text.splitlines(), 1):
            s = line.strip()
            if s.startswith("[") and s.endswith("]"):
                section = s[1:-1].strip()
                self.lines.setdefault((section, None), no)
            elif "=" in s and section is not None and not s.startswith(("#", ";")):
                key = s.split("=", 1)[0].strip()
                self.lines.setdefault((section, key), no)

    def __call__(self, section, key=None) -> str:
        no = self.lines.get((section, key)) or self.lines.get((section, None))
        return f"{self.name}:{no}" if no else self.name


def _number(raw: str, where: str, what: str) -> float:
    try:
        tree = compile_expr(raw).expr
    except ExpressionError as exc:
        raise ProblemFileError(f"{what}: {exc}", where) from exc
    if not is_constant(tree):
        raise ProblemFileError(f"{what} must be a constant, got {raw!r}", where)
    try:
        return float(eval_expr(tree, 0.0))
    except ExpressionError as exc:
        raise ProblemFileError(f"{what}: {exc}", where) from exc


def _integer(raw: str, where: str, what: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ProblemFileError(f"{what} must be an integer, got {raw!r}", where) from None


def _expression(raw: str, where: str, what: str) -> str:
    try:
        compile_expr(raw)
    except ExpressionError as exc:
        raise ProblemFileError(f"{what}: {exc}", where) from exc
    return raw


def read_coefficients(path: str) -> np.ndarray:
    """Coefficient list from a file: one value per line, or ``n,c_n`` rows under a header."""
    values = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or not "".join(row).strip():
                continue
            try:
                nums = [float(x) for x in row]
            except ValueError:
                if values:
                    raise ValueError(f"non-numeric row {row!r} in {path}") from None
                continue  # header
            values.append(nums[-1])
    if not values:
        raise ValueError(f"no coefficients in {path}")
    return np.asarray(values)


def parse_problem(text: str, name: str = "<problem>", base_dir: str = ".") -> ProblemSpec:
    """Parse problem-file text.

    Raises:
        ProblemFileError: On syntax errors, unknown sections or keys, bad
            expressions, or a constraint count that differs from the order.
    """
    where = _Located(text, name)
    cp = configparser.ConfigParser(delimiters=("=",), interpolation=None, comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=name)
    except configparser.Error as exc:
        loc = f"{name}:{exc.lineno}" if getattr(exc, "lineno", None) else name
        raise ProblemFileError(exc.message.splitlines()[0], loc) from None

    for section in cp.sections():
        if section not in _SECTIONS:
            raise ProblemFileError(f"unknown section [{section}]", where(section))
        for key in cp[section]:
            if section == "constraints":
                if not _CONSTRAINT.match(key):
                    raise ProblemFileError(f"unknown constraint {key!r}", where(section, key))
            elif section == "equation" and (_COEFF.match(key) or _LOWRANK.match(key)):
                continue
            elif key not in _SECTIONS[section]:
                raise ProblemFileError(f"unknown key {key!r} in [{section}]", where(section, key))
    for section in ("domain", "equation"):
        if not cp.has_section(section):
            raise ProblemFileError(f"missing section [{section}]", name)

    if "T" not in cp["domain"]:
        raise ProblemFileError("[domain] needs T", where("domain"))
    T = _number(cp["domain"]["T"], where("domain", "T"), "T")
    if not T > 0:
        raise ProblemFileError(f"T must be positive, got {T!r}", where("domain", "T"))
    dom = Domain(T)

    eq = cp["equation"]
    if "order" not in eq:
        raise ProblemFileError("[equation] needs order", where("equation"))
    order = _integer(eq["order"], where("equation", "order"), "order")
    if order < 0:
        raise ProblemFileError("order must be non-negative", where("equation", "order"))
    coeffs = []
    for j in range(order + 1):
        key = f"coeff_{j}"
        raw = eq.get(key, "0")
        coeffs.append(_expression(raw, where("equation", key), key))
    for key in eq:
        m = _COEFF.match(key)
        if m and int(m.group(1)) > order:
            raise ProblemFileError(f"{key} exceeds order {order}", where("equation", key))

    kind = eq.get("kind", "none").strip()
    if kind not in KINDS:
        raise ProblemFileError(f"kind must be one of {', '.join(KINDS)}", where("equation", "kind"))
    kernel = None
    if kind in ("volterra", "fredholm", "fredholm_abs"):
        if "kernel" not in eq:
            raise ProblemFileError(f"kind {kind} needs a kernel", where("equation", "kind"))
        kernel = _expression(eq["kernel"], where("equation", "kernel"), "kernel")
    lowrank = []
    if kind.endswith("_lowrank"):
        for key in sorted((k for k in eq if _LOWRANK.match(k)), key=lambda k: int(k[8:])):
            parts = eq[key].split("|")
            if len(parts) != 2:
                raise ProblemFileError(f"{key} must read 'phi(t) | psi(s)'", where("equation", key))
            lowrank.append(tuple(_expression(x.strip(), where("equation", key), key) for x in parts))
        if not lowrank:
            raise ProblemFileError(f"kind {kind} needs lowrank_<i> terms", where("equation", "kind"))
    g = _expression(eq.get("g", "1"), where("equation", "g"), "g")
    h = _expression(eq.get("h", "1"), where("equation", "h"), "h")
    sign = _number(eq.get("sign", "1"), where("equation", "sign"), "sign")

    raw_rhs = eq.get("rhs", "0").strip()
    if raw_rhs.startswith("file:"):
        path = os.path.join(base_dir, raw_rhs[5:].strip())
        try:
            rhs = LegendreSeries(dom, read_coefficients(path))
        except (OSError, ValueError) as exc:
            raise ProblemFileError(str(exc), where("equation", "rhs")) from exc
    else:
        rhs = _expression(raw_rhs, where("equation", "rhs"), "rhs")

    constraints = []
    if cp.has_section("constraints"):
        for key, raw in cp["constraints"].items():
            loc = where("constraints", key)
            target = _number(raw, loc, f"constraint {key!r}")
            m = _CONSTRAINT.match(key)
            if m.group(1) is None:
                constraints.append(ConstraintRow("mean", target))
                continue
            t0 = _number(m.group(2), loc, "constraint point")
            if not 0.0 <= t0 <= T:
                raise ProblemFileError(f"constraint point {t0!r} lies outside [0, {T!r}]", loc)
            constraints.append(ConstraintRow(m.group(1), target, t0))
    if len(constraints) != order:
        raise ProblemFileError(
            f"order {order} needs {order} constraints, found {len(constraints)}",
            where("constraints") if cp.has_section("constraints") else name,
        )

    settings = {}
    if cp.has_section("solver"):
        s = cp["solver"]
        if "tol" in s:
            settings["tol"] = _number(s["tol"], where("solver", "tol"), "tol")
            if not settings["tol"] > 0:
                raise ProblemFileError("tol must be positive", where("solver", "tol"))
        for key in ("n_min", "n_max"):
            if key in s:
                settings[key] = _integer(s[key], where("solver", key), key)

    problem = IdeProblem(
        dom, coeffs, kind, kernel, g=g, h=h, sign=sign, rhs=rhs,
        constraints=constraints, lowrank=lowrank,
    )
    return ProblemSpec(problem, source=name, **settings)


def load_problem(path: str) -> ProblemSpec:
    """Read and parse a problem file."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ProblemFileError(str(exc), path) from exc
    return parse_problem(text, name=path, base_dir=os.path.dirname(os.path.abspath(path)))
