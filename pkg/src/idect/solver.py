"""Assembly and solution of convolution-type integro-differential equations.

A problem is stored in moved-left form

    sum_j a_j(t) y^(j)(t) - sign * g(t) Int k(t - s) h(s) y(s) ds = f(t),

with r = order linear constraints.  The discretization stacks the r
constraint rows on top of the first N - r rows of

    L - sign * S_[r] M[g] K M[h],   L = sum_j S_{j->r} M_{j+1/2}[S_[j] a_j] D^(j),

which maps Legendre coefficients of y to C^(r+1/2) coefficients, and the
right-hand side is [gamma; S_[r] f].  Every operator is built at a padded
size and cropped so the leading block is exact.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from numbers import Real
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from .approx import DEFAULT_TOL, Domain, LegendreSeries, approximate, pad
from .conv import KernelPair, fredholm_op, volterra_op, weighted_integral_block
from .errors import ConstraintCountMismatch, DomainMismatch, MaxNReached
from .funcparse import compile_expr, eval_expr, is_constant
from .linalg import AlmostBandedMatrix, BandedMatrix, aband_matvec, aband_solve, band_matvec, band_mul
from .ops import constraint_row, conversion_between, cumint_op, defint_op, diff_op, mult_op, sr_op

__all__ = [
    "KINDS",
    "ConstraintRow",
    "IdeProblem",
    "Solution",
    "assemble",
    "solve",
    "solve_fixed",
    "convergence_study",
    "spy_pattern",
    "dense_row_count",
    "lowrank_volterra_block",
    "sample_reference",
]

KINDS = ("volterra", "fredholm", "fredholm_abs", "none", "volterra_lowrank", "fredholm_lowrank")
SOLVER_TOL = 1e-13
GRID_POINTS = 1000

Expr = Union[str, Real, Callable, LegendreSeries]


@dataclass(frozen=True)
class ConstraintRow:
    """Linear constraint ``B y = target``.

    Attributes:
        kind: ``"eval"``, ``"deriv"`` or ``"mean"``.
        target: Right-hand side gamma.
        t0: Point for ``eval`` and ``deriv``.
    """

    kind: str
    target: float
    t0: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("eval", "deriv", "mean"):
            raise ValueError(f"unknown constraint kind {self.kind!r}")
        if self.kind != "mean" and self.t0 is None:
            raise ValueError(f"{self.kind} constraint needs t0")

    def row(self, n: int, domain: Domain) -> np.ndarray:
        return constraint_row(self.kind, n, domain, self.t0)


@dataclass(frozen=True)
class IdeProblem:
    """Symbolic description of one equation.

    Expressions may be strings (parsed by :mod:`idect.funcparse`), numbers,
    vectorized callables, or ready-made Legendre series.  The kernel is a
    function of the single variable u = t - s.

    Attributes:
        domain: Interval [0, T].
        coeffs: a_0..a_r; a_j multiplies y^(j).
        kind: One of :data:`KINDS`.
        kernel: k(u); unused for ``none`` and the low-rank kinds.
        g: Outer weight.
        h: Inner weight.
        sign: Multiplier of the integral term on the right-hand side.
        rhs: f(t).
        constraints: r constraint rows.
        lowrank: (phi_i, psi_i) pairs for the low-rank kinds, kernel = sum phi_i(t) psi_i(s).
    """

    domain: Domain
    coeffs: Sequence[Expr]
    kind: str = "none"
    kernel: Optional[Expr] = None
    g: Expr = 1.0
    h: Expr = 1.0
    sign: float = 1.0
    rhs: Expr = 0.0
    constraints: Sequence[ConstraintRow] = ()
    lowrank: Sequence[tuple] = ()

    def __post_init__(self):
        if not isinstance(self.domain, Domain):
            object.__setattr__(self, "domain", Domain(self.domain))
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if len(self.coeffs) == 0:
            raise ValueError("need at least the coefficient a_0")
        if self.kind in ("volterra", "fredholm", "fredholm_abs") and self.kernel is None:
            raise ValueError(f"kind {self.kind!r} needs a kernel")
        object.__setattr__(self, "coeffs", tuple(self.coeffs))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        object.__setattr__(self, "lowrank", tuple(tuple(term) for term in self.lowrank))

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1


@dataclass(frozen=True)
class Solution:
    y: LegendreSeries
    N_used: int
    residual: float
    diagnostics: dict = field(default_factory=dict)
    converged: bool = True

    def __call__(self, t):
        return self.y(t)


# ------------------------------------------------------------------ expressions


def _callable(e: Expr, flip=False) -> Callable:
    if isinstance(e, str):
        f = compile_expr(e)
    elif isinstance(e, LegendreSeries):
        f = e
    else:
        f = e
    return (lambda t: f(-np.asarray(t))) if flip else f


def _constant_value(e: Expr) -> Optional[float]:
    if isinstance(e, bool):
        raise TypeError("boolean is not an expression")
    if isinstance(e, Real):
        return float(e)
    if isinstance(e, str):
        f = compile_expr(e)
        if is_constant(f.expr):
            return float(eval_expr(f.expr, 0.0))
    if isinstance(e, LegendreSeries) and e.degree == 0:
        return float(e.coeffs[0])
    return None


def to_series(e: Expr, domain: Domain, tol: float, flip: bool = False) -> LegendreSeries:
    """Legendre series of an expression on ``domain`` (of u -> e(-u) if ``flip``)."""
    if isinstance(e, LegendreSeries):
        if flip:
            raise ValueError("cannot flip a ready-made series; pass k(-t) explicitly")
        if e.domain != domain:
            raise DomainMismatch(f"series lives on {e.domain}, problem on {domain}")
        return e
    c = _constant_value(e)
    if c is not None:
        return LegendreSeries(domain, [c])
    return approximate(_callable(e, flip), domain, tol)


@dataclass
class _Prepared:
    """Series data of a problem, computed once per solve."""

    problem: IdeProblem
    coeffs: list  # per j: float or LegendreSeries
    g: object
    h: object
    kernel: Optional[KernelPair]
    lowrank: list
    rhs: LegendreSeries

    @property
    def pad(self) -> int:
        r = self.problem.order

        def deg(x):
            return x.degree if isinstance(x, LegendreSeries) else 0

        width = max([deg(a) for a in self.coeffs] + [0])
        width += deg(self.g) + deg(self.h)
        if self.kernel is not None:
            width += self.kernel.k.degree + 3
            if self.kernel.k_flip is not None:
                width += self.kernel.k_flip.degree + 3
        for phi, psi in self.lowrank:
            width = max(width, phi.degree + psi.degree + 2)
        return 2 * r + width + 4

    @property
    def min_size(self) -> int:
        degs = [a.degree for a in self.coeffs if isinstance(a, LegendreSeries)]
        degs += [w.degree for w in (self.g, self.h) if isinstance(w, LegendreSeries)]
        for phi, psi in self.lowrank:
            degs += [phi.degree, psi.degree]
        return 2 * max(degs + [0]) + 2


def _prepare(p: IdeProblem, tol: float) -> _Prepared:
    if len(p.constraints) != p.order:
        raise ConstraintCountMismatch(
            f"order {p.order} problem needs {p.order} constraints, got {len(p.constraints)}"
        )
    dom = p.domain
    data_tol = min(tol, DEFAULT_TOL)

    def lift(e):
        c = _constant_value(e)
        return c if c is not None else to_series(e, dom, data_tol)

    coeffs = [lift(a) for a in p.coeffs]
    kernel = None
    if p.kind == "volterra":
        kernel = KernelPair(to_series(p.kernel, dom, data_tol))
    elif p.kind == "fredholm":
        kernel = KernelPair(to_series(p.kernel, dom, data_tol), to_series(p.kernel, dom, data_tol, flip=True))
    elif p.kind == "fredholm_abs":
        kernel = KernelPair(to_series(p.kernel, dom, data_tol), abs_mode=True)
    lowrank = []
    if p.kind.endswith("_lowrank"):
        lowrank = [(to_series(a, dom, data_tol), to_series(b, dom, data_tol)) for a, b in p.lowrank]
    return _Prepared(
        problem=p,
        coeffs=coeffs,
        g=lift(p.g),
        h=lift(p.h),
        kernel=kernel,
        lowrank=lowrank,
        rhs=to_series(p.rhs, dom, data_tol),
    )


# ------------------------------------------------------------------ assembly


def _differential_part(prep: _Prepared, nb: int) -> BandedMatrix:
    r = prep.problem.order
    dom = prep.problem.domain
    L = BandedMatrix.zeros((nb, nb))
    for j, a in enumerate(prep.coeffs):
        if isinstance(a, float) and a == 0.0:
            continue
        D = diff_op(j, nb, dom) if j > 0 else BandedMatrix.identity(nb)
        lam = j + 0.5
        if isinstance(a, float):
            term = a * D
        else:
            c = band_matvec(conversion_between(0.5, lam, a.coeffs.size), a.coeffs)
            term = band_mul(mult_op(LegendreSeries(dom, c, lam), nb), D)
        if j < r:
            term = band_mul(conversion_between(lam, r + 0.5, nb), term)
        L = L + term
    return L


def _integral_part(prep: _Prepared, nb: int) -> Optional[BandedMatrix]:
    p = prep.problem
    if p.kind == "none":
        return None
    if p.kind == "volterra":
        core = volterra_op(prep.kernel.k, nb, p.domain)
    elif p.kind in ("fredholm", "fredholm_abs"):
        core = fredholm_op(prep.kernel, nb, p.domain)
    else:
        block = lowrank_volterra_block(prep.lowrank, nb, p.domain, definite=p.kind == "fredholm_lowrank")
        return _weighted(prep, block, nb)
    return _weighted(prep, core, nb)


def _weighted(prep: _Prepared, core: BandedMatrix, nb: int) -> BandedMatrix:
    def arg(w):
        return None if (isinstance(w, float) and w == 1.0) else w

    return weighted_integral_block(arg(prep.g), core, arg(prep.h), nb)


def _assemble(prep: _Prepared, n: int):
    p = prep.problem
    r = p.order
    if n <= r:
        raise ValueError(f"need more than {r} coefficients, got {n}")
    nb = max(n + prep.pad, prep.min_size)
    A = _differential_part(prep, nb)
    K = _integral_part(prep, nb)
    if K is not None:
        A = A - p.sign * band_mul(sr_op(r, nb), K)
    A = A.crop(n - r, n).tighten()
    f = pad(prep.rhs, nb - 1).coeffs[:nb]
    Sf = band_matvec(sr_op(r, nb), f)[: n - r]
    dense = np.array([c.row(n, p.domain) for c in p.constraints]).reshape(r, n)
    gamma = np.array([c.target for c in p.constraints], dtype=float)
    return AlmostBandedMatrix(dense, A), np.concatenate([gamma, Sf])


def assemble(p: IdeProblem, N: int, tol: float = SOLVER_TOL):
    """Discretize ``p`` with N coefficients.

    Returns:
        (AlmostBandedMatrix, rhs) of size N.

    Raises:
        ConstraintCountMismatch: If the number of constraints differs from the order.
    """
    return _assemble(_prepare(p, tol), N)


# ------------------------------------------------------------------ solving


def _solve_at(prep: _Prepared, n: int) -> tuple[np.ndarray, float, dict]:
    t0 = time.perf_counter()
    M, b = _assemble(prep, n)
    x = aband_solve(M, b)
    elapsed = time.perf_counter() - t0
    res = float(np.abs(aband_matvec(M, x) - b).max())
    scale = M.norm_inf() * float(np.abs(x).max(initial=0.0)) + float(np.abs(b).max(initial=0.0))
    rel = res / scale if scale > 0 else res
    diag = {
        "bandwidths": M.banded.bandwidths,
        "dense_rows": dense_row_count(M),
        "solve_time": elapsed,
        "residual_abs": res,
    }
    return x, rel, diag


def _tail_ratio(x: np.ndarray) -> float:
    big = float(np.abs(x).max(initial=0.0))
    if big == 0.0:
        return 0.0
    tail = max(5, x.size // 32)
    return float(np.abs(x[-tail:]).max()) / big


def solve_fixed(p: IdeProblem, N: int, tol: float = SOLVER_TOL) -> Solution:
    """Solve with exactly N coefficients (no adaptivity)."""
    prep = _prepare(p, tol)
    x, rel, diag = _solve_at(prep, N)
    trail = _tail_ratio(x)
    diag["trailing"] = trail
    return Solution(LegendreSeries(p.domain, x), N, rel, diag, trail <= tol and rel <= 1e3 * tol)


def solve(p: IdeProblem, tol: float = SOLVER_TOL, N_min: int = 32, N_max: int = 4096) -> Solution:
    """Solve by doubling N until the solution coefficients have decayed.

    Accepts N when the last max(5, N/32) coefficients are below
    ``tol * max|y_n|`` and the relative residual is at most ``1e3 * tol``.

    Warns:
        MaxNReached: When N_max is hit first; the last solution is returned
            with ``converged=False``.

    Raises:
        SingularSystem: From the factorization.
    """
    if N_min > N_max:
        raise ValueError("N_min exceeds N_max")
    prep = _prepare(p, tol)
    n = max(N_min, p.order + 1)
    while True:
        n = min(n, N_max)
        x, rel, diag = _solve_at(prep, n)
        trail = _tail_ratio(x)
        diag["trailing"] = trail
        ok = trail <= tol and rel <= 1e3 * tol
        if ok or n >= N_max:
            if not ok:
                warnings.warn(
                    f"no convergence to tol={tol:g} by N={n} (trailing {trail:.2e}, residual {rel:.2e})",
                    MaxNReached,
                    stacklevel=2,
                )
            return Solution(LegendreSeries(p.domain, x), n, rel, diag, ok)
        n *= 2


# ------------------------------------------------------------------ studies


def sample_reference(f: Callable, t: np.ndarray, T: float) -> np.ndarray:
    """Evaluate f on t, filling removable singularities by cubic extrapolation."""
    t = np.asarray(t, dtype=float)
    with np.errstate(all="ignore"):
        try:
            vals = np.asarray(f(t), dtype=float) * np.ones_like(t)
        except Exception:
            vals = np.array([_safe(f, ti) for ti in t])
    bad = ~np.isfinite(vals)
    for i in np.nonzero(bad)[0]:
        h = 1e-5 * T * (1 if t[i] < 0.5 * T else -1)
        v = [_safe(f, t[i] + k * h) for k in (1, 2, 3)]
        vals[i] = 3 * v[0] - 3 * v[1] + v[2]
    return vals


def _safe(f, t):
    try:
        with np.errstate(all="ignore"):
            return float(np.asarray(f(np.array([t])), dtype=float)[0])
    except Exception:
        return np.nan


def convergence_study(
    p: IdeProblem,
    N_list: Iterable[int],
    exact: Optional[Expr] = None,
    n_ref: Optional[int] = None,
    tol: float = SOLVER_TOL,
) -> list[dict]:
    """Max error on 1000 equispaced points for each N.

    The reference is ``exact`` when given, otherwise a solve at ``n_ref``
    coefficients (default 2 max(N_list)).

    Returns:
        Records ``{"N": N, "max_error": err}`` in the order of ``N_list``.
    """
    N_list = [int(n) for n in N_list]
    if not N_list:
        return []
    prep = _prepare(p, tol)
    T = p.domain.T
    grid = np.linspace(0.0, T, GRID_POINTS)
    if exact is not None:
        c = _constant_value(exact)
        ref = np.full(grid.shape, c) if c is not None else sample_reference(_callable(exact), grid, T)
    else:
        n_ref = 2 * max(N_list) if n_ref is None else int(n_ref)
        x, _, _ = _solve_at(prep, n_ref)
        ref = LegendreSeries(p.domain, x)(grid)
    cache = {}
    out = []
    for n in N_list:
        if n not in cache:
            x, _, _ = _solve_at(prep, n)
            cache[n] = float(np.abs(LegendreSeries(p.domain, x)(grid) - ref).max())
        out.append({"N": n, "max_error": cache[n]})
    return out


def spy_pattern(M: AlmostBandedMatrix, threshold: Optional[float] = None) -> list[tuple[int, int]]:
    """Positions (row, col) with |entry| > threshold (default 1e-14 max|entry|), row-major."""
    r = M.n_dense
    big = max(np.abs(M.dense_rows).max(initial=0.0), np.abs(M.banded.diags).max(initial=0.0))
    thr = 1e-14 * big if threshold is None else threshold
    out = [(int(i), int(j)) for i, j in zip(*np.nonzero(np.abs(M.dense_rows) > thr))]
    B = M.banded
    lo = B.lower
    for i in range(B.shape[0]):
        for k in range(B.diags.shape[0]):
            j = i + k - lo
            if 0 <= j < B.shape[1] and abs(B.diags[k, i]) > thr:
                out.append((i + r, j))
    return out


def dense_row_count(M: AlmostBandedMatrix, threshold: Optional[float] = None) -> int:
    """Constraint rows with nonzeros beyond the columns a band row in their place would cover."""
    big = max(np.abs(M.dense_rows).max(initial=0.0), np.abs(M.banded.diags).max(initial=0.0))
    thr = 1e-14 * big if threshold is None else threshold
    count = 0
    for i, row in enumerate(M.dense_rows):
        nz = np.nonzero(np.abs(row) > thr)[0]
        if nz.size and nz[-1] > i + M.banded.upper:
            count += 1
    return count


def lowrank_volterra_block(terms, n: int, domain, definite: bool = False) -> BandedMatrix:
    """sum_i M[phi_i] Q M[psi_i] for kernel sum_i phi_i(t) psi_i(s).

    Q is the indefinite integral from 0 (Volterra) or, with ``definite``,
    the integral over [0, T] (Fredholm).
    """
    dom = domain if isinstance(domain, Domain) else Domain(domain)
    terms = list(terms)
    if not terms:
        return BandedMatrix.zeros((n, n))
    width = max(phi.degree + psi.degree for phi, psi in terms)
    nb = max(n + width + 2, 2 * max(max(phi.degree, psi.degree) for phi, psi in terms) + 2)
    Q = defint_op(nb, dom) if definite else cumint_op(nb, dom)
    out = BandedMatrix.zeros((n, n))
    for phi, psi in terms:
        out = out + weighted_integral_block(phi, Q, psi, nb).crop(n)
    return out
