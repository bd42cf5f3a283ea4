"""Discrete Legendre convolution operators.

For a kernel k given by Legendre coefficients of degree m on [0, T], the map
y -> int_0^t k(t - s) y(s) ds acts on Legendre coefficients as a banded
matrix V[k] with m + 2 sub- and superdiagonals.  Its first two columns have
closed forms, the lower triangle follows from a three-term recurrence in the
column index, and the upper triangle from the scaled symmetry

    V[j, n] = (-1)^(n + j) (2 j + 1) / (2 n + 1) V[n, j].

Fredholm operators split into a Volterra part plus a reflected Volterra
part built from k(-t).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .approx import Domain, LegendreSeries
from .errors import DegreeError, DomainMismatch, MissingFlippedKernel, TruncationError
from .linalg import BandedMatrix, band_mul
from .ops import mult_op

__all__ = [
    "KernelPair",
    "volterra_op",
    "fredholm_op",
    "recurrence_residual",
    "weighted_integral_block",
    "volterra_oracle",
    "fredholm_oracle",
    "adaptive_gauss_legendre",
]

RECURRENCE_WARN = 1e-8


@dataclass(frozen=True)
class KernelPair:
    """Legendre data for a Fredholm kernel.

    Attributes:
        k: Coefficients of k(t) on [0, T].
        k_flip: Coefficients of k(-t) on [0, T]; omitted in ``abs_mode``.
        abs_mode: Kernel is k(|t - s|), so both halves use ``k``.
    """

    k: LegendreSeries
    k_flip: Optional[LegendreSeries] = None
    abs_mode: bool = False

    def __post_init__(self):
        if self.abs_mode and self.k_flip is not None:
            raise ValueError("abs_mode kernels take no flipped series")
        if self.k_flip is not None and self.k_flip.domain != self.k.domain:
            raise DomainMismatch("k and k_flip live on different intervals")


def _lower_band(k: np.ndarray, T: float, n: int) -> np.ndarray:
    """low[d, c] = V[c + d, c] for d = 0..m+2 (two extra zero rows for the recurrence)."""
    m = k.size - 1
    w = m + 3
    low = np.zeros((w + 2, n))
    kk = np.zeros(m + 4)
    kk[: m + 1] = k
    # column 0: coefficients of int_0^t k
    col0 = np.zeros(w + 2)
    col0[0] = 0.5 * T * (kk[0] - kk[1] / 3.0)
    j = np.arange(1, m + 2)
    col0[1 : m + 2] = 0.5 * T * (kk[j - 1] / (2 * j - 1) - kk[j + 1] / (2 * j + 3))
    low[:, 0] = col0
    if n == 1:
        return low[:w]
    # column 1, rows j >= 1 (row 0 lies above the diagonal)
    j = np.arange(1, w + 1)
    c0 = np.concatenate([col0, np.zeros(2)])
    low[:w, 1] = c0[j - 1] / (2 * j - 1) - c0[j] - c0[j + 1] / (2 * j + 3)
    # march: V[j, c+1] = -(2c+1)/(2j+3) V[j+1, c] + (2c+1)/(2j-1) V[j-1, c] + V[j, c-1]
    d = np.arange(w)
    for c in range(1, n - 1):
        j = c + 1 + d
        low[:w, c + 1] = (
            -(2 * c + 1) / (2 * j + 3) * low[d + 2, c]
            + (2 * c + 1) / (2 * j - 1) * low[d, c]
            + low[d + 2, c - 1]
        )
    return low[:w]


def volterra_op(k: LegendreSeries, n: int, domain: Domain | None = None) -> BandedMatrix:
    """Discrete Volterra convolution operator V[k] (leading n x n block).

    Args:
        k: Legendre coefficients of the kernel on [0, T] (degree m).
        n: Number of coefficients; must be at least m + 3.
        domain: Optional interval, checked against ``k.domain``.

    Raises:
        DomainMismatch: ``domain`` differs from the kernel's interval.
        TruncationError: ``n < m + 3``.
    """
    if k.lam != 0.5:
        raise ValueError("kernel must be given in the Legendre basis")
    if domain is not None and domain != k.domain:
        raise DomainMismatch(f"kernel lives on {k.domain}, operator requested on {domain}")
    m = k.degree
    if n < m + 3:
        raise TruncationError(f"kernel of degree {m} needs n >= {m + 3}, got {n}")
    T = k.domain.T
    bw = m + 2
    # compute a few extra columns so the cropped block sees every in-band entry
    big = n + bw
    low = _lower_band(k.coeffs, T, big)
    diags = np.zeros((2 * bw + 1, n))
    rows = np.arange(n)
    for d in range(bw + 1):
        # lower: row i, col i - d  -> low[d, i - d]
        ok = rows >= d
        diags[bw - d, ok] = low[d, rows[ok] - d]
        if d == 0:
            continue
        # upper by scaled symmetry: V[i, i + d] = (-1)^d (2i + 1)/(2i + 2d + 1) V[i + d, i]
        cols = rows + d
        ok = cols < big
        scale = (-1.0) ** d * (2 * rows + 1) / (2 * cols + 1)
        diags[bw + d, ok] = scale[ok] * low[d, rows[ok]]
    V = BandedMatrix(diags, bw, bw, (n, n))
    res = recurrence_residual(V)
    if res > RECURRENCE_WARN:
        warnings.warn(
            f"convolution recurrence residual {res:.2e} exceeds {RECURRENCE_WARN:g}; "
            "operator may be inaccurate",
            RuntimeWarning,
            stacklevel=2,
        )
    return V


def recurrence_residual(V: BandedMatrix) -> float:
    """Largest violation of the column recurrence over all interior entries, relative to max|V|.

    The lower triangle satisfies the recurrence by construction; the upper
    triangle (filled by symmetry) only does so if the marched values are
    accurate, so this measures the conditioning of the build.
    """
    n = V.shape[0]
    scale = np.abs(V.diags).max()
    if n < 4 or scale == 0:
        return 0.0
    A = V  # entries via diagonals to stay O(n * bw)
    worst = 0.0
    bw = max(V.lower, V.upper)
    for off in range(-bw, bw + 1):
        # entries (j, c + 1) with c + 1 = j + off, 1 <= j <= n - 2, 1 <= c <= n - 3
        j = np.arange(1, n - 1)
        c = j + off - 1
        ok = (c >= 1) & (c + 1 <= n - 2)
        j, c = j[ok], c[ok]
        if j.size == 0:
            continue
        lhs = _entries(A, j, c + 1)
        rhs = (
            -(2 * c + 1) / (2 * j + 3) * _entries(A, j + 1, c)
            + (2 * c + 1) / (2 * j - 1) * _entries(A, j - 1, c)
            + _entries(A, j, c - 1)
        )
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    return worst / scale


def _entries(A: BandedMatrix, i, j):
    d = j - i
    out = np.zeros(i.shape)
    ok = (d >= -A.lower) & (d <= A.upper) & (i >= 0) & (i < A.shape[0]) & (j >= 0) & (j < A.shape[1])
    out[ok] = A.diags[d[ok] + A.lower, i[ok]]
    return out


def fredholm_op(pair: KernelPair, n: int, domain: Domain | None = None) -> BandedMatrix:
    """F = V[k] + I~ V[k~] I~ with I~ = diag(1, -1, 1, ...); in ``abs_mode`` k~ = k."""
    if pair.abs_mode:
        flipped = pair.k
    elif pair.k_flip is None:
        raise MissingFlippedKernel("Fredholm operator needs the coefficients of k(-t)")
    else:
        flipped = pair.k_flip
    V = volterra_op(pair.k, n, domain)
    W = volterra_op(flipped, n, domain)
    return V + W.flip_signs()


def weighted_integral_block(g, core: BandedMatrix, h, n: int) -> BandedMatrix:
    """M[g] core M[h], cropped to n x n.

    ``g`` and ``h`` are Legendre series or scalars (``None`` means 1).  The
    leading n x n block is exact when ``core`` carries at least
    deg(g) + deg(h) rows and columns beyond n.

    Raises:
        DegreeError: If a multiplication band would be clipped.
    """
    size = core.shape[0]
    if size < n:
        raise DegreeError(f"core has size {size}, smaller than requested {n}")
    out = core
    for w, left in ((h, False), (g, True)):
        if w is None:
            continue
        if isinstance(w, LegendreSeries):
            if w.degree == 0:
                out = float(w.coeffs[0]) * out
                continue
            M = mult_op(w, size)
            out = band_mul(M, out) if left else band_mul(out, M)
        else:
            out = float(w) * out
    return out.crop(n)


# ----------------------------------------------------------------------------- oracles

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)


def adaptive_gauss_legendre(f: Callable, a: float, b: float, tol: float = 1e-13, depth: int = 40) -> float:
    """Adaptive 20-point Gauss-Legendre with interval bisection."""
    def rule(lo, hi):
        x = 0.5 * (hi - lo) * _GL_NODES + 0.5 * (hi + lo)
        return 0.5 * (hi - lo) * float(np.dot(_GL_WEIGHTS, np.asarray(f(x), dtype=float) * np.ones_like(x)))

    if b == a:
        return 0.0
    total = 0.0
    stack = [(a, b, rule(a, b), 0)]
    while stack:
        lo, hi, whole, lvl = stack.pop()
        mid = 0.5 * (lo + hi)
        left, right = rule(lo, mid), rule(mid, hi)
        if abs(left + right - whole) <= tol * max(1.0, abs(left + right)) * (hi - lo) / (b - a) or lvl >= depth:
            total += left + right
        else:
            stack.append((lo, mid, left, lvl + 1))
            stack.append((mid, hi, right, lvl + 1))
    return total


def volterra_oracle(k: Callable, y: Callable, domain, t: float, tol: float = 1e-13) -> float:
    """int_0^t k(t - s) y(s) ds by adaptive quadrature."""
    dom = domain if isinstance(domain, Domain) else Domain(domain)
    t = float(dom.check(t))
    return adaptive_gauss_legendre(lambda s: k(t - s) * y(s), 0.0, t, tol)


def fredholm_oracle(k: Callable, y: Callable, domain, t: float, abs_mode=False, tol: float = 1e-13) -> float:
    """int_0^T k(t - s) y(s) ds (or k(|t - s|)) by adaptive quadrature split at s = t."""
    dom = domain if isinstance(domain, Domain) else Domain(domain)
    t = float(dom.check(t))
    kern = (lambda u: k(np.abs(u))) if abs_mode else k
    left = adaptive_gauss_legendre(lambda s: kern(t - s) * y(s), 0.0, t, tol)
    right = adaptive_gauss_legendre(lambda s: kern(t - s) * y(s), t, dom.T, tol)
    return left + right
