"""Banded operators on mapped Legendre / ultraspherical coefficients on [0, T].

All constructors take ``n``, the number of coefficients kept, and return the
leading ``n x n`` block of the infinite operator.  Differentiation maps the
Legendre space P into C^(order + 1/2); conversion S_lam maps C^(lam) into
C^(lam + 1); everything else acts within one space.
"""

from __future__ import annotations

import numpy as np

from .approx import Domain, LegendreSeries
from .errors import DegreeError, DomainError
from .linalg import BandedMatrix, band_mul

__all__ = [
    "diff_op",
    "conv_op",
    "sr_op",
    "cumint_op",
    "defint_op",
    "jacobi_op",
    "mult_op",
    "flip_op",
    "constraint_row",
]


def _as_domain(domain) -> Domain:
    return domain if isinstance(domain, Domain) else Domain(domain)


def _check_lam(lam) -> float:
    lam = float(lam)
    if lam <= 0 or (2 * lam) % 2 != 1:
        raise ValueError(f"lam must be a positive half-integer, got {lam!r}")
    return lam


def diff_op(order: int, n: int, domain=1.0) -> BandedMatrix:
    """d^order/dt^order from P to C^(order + 1/2).

    Built as the product of single derivatives C^(lam) -> C^(lam+1), each a
    superdiagonal with entries 2 lam (2 / T).
    """
    if order < 1:
        raise ValueError("derivative order must be at least 1")
    T = _as_domain(domain).T
    D = None
    for i in range(order):
        lam = 0.5 + i
        step = BandedMatrix.from_diagonals({1: 2.0 * lam * 2.0 / T}, (n, n))
        D = step if D is None else band_mul(step, D)
    return D.tighten()


def conv_op(lam, n: int) -> BandedMatrix:
    """Conversion S_lam: C^(lam) -> C^(lam + 1).

    C_k^(lam) = lam / (k + lam) * (C_k^(lam+1) - C_{k-2}^(lam+1)).
    """
    lam = _check_lam(lam)
    i = np.arange(n, dtype=float)
    return BandedMatrix.from_diagonals(
        {0: lam / (i + lam), 2: -lam / (i + 2 + lam)}, (n, n)
    )


def sr_op(r: int, n: int, domain=None) -> BandedMatrix:
    """Composite conversion S_{r-1/2} ... S_{1/2}: P -> C^(r + 1/2); identity for r = 0."""
    if r < 0:
        raise ValueError("r must be non-negative")
    S = BandedMatrix.identity(n)
    for i in range(r):
        S = band_mul(conv_op(0.5 + i, n), S)
    return S


def conversion_between(lam_from, lam_to, n: int) -> BandedMatrix:
    """S_{lam_to - 1} ... S_{lam_from}: C^(lam_from) -> C^(lam_to)."""
    steps = int(round(lam_to - lam_from))
    if steps < 0:
        raise ValueError("conversion only raises lam")
    S = BandedMatrix.identity(n)
    for i in range(steps):
        S = band_mul(conv_op(lam_from + i, n), S)
    return S


def cumint_op(n: int, domain=1.0) -> BandedMatrix:
    """Indefinite integral from 0 acting on P."""
    T = _as_domain(domain).T
    j = np.arange(n, dtype=float)
    with np.errstate(divide="ignore"):
        sub = np.where(j >= 1, 1.0 / (2 * j - 1), 0.0)
    diag = np.zeros(n)
    diag[0] = 1.0
    return BandedMatrix.from_diagonals(
        {-1: 0.5 * T * sub, 0: 0.5 * T * diag, 1: -0.5 * T / (2 * j + 3)}, (n, n)
    )


def defint_op(n: int, domain=1.0) -> BandedMatrix:
    """Definite integral over [0, T], returned as a constant function."""
    T = _as_domain(domain).T
    diag = np.zeros(n)
    diag[0] = T
    return BandedMatrix.from_diagonals({0: diag}, (n, n))


def jacobi_op(lam, n: int) -> BandedMatrix:
    """Multiplication by x = 2 t / T - 1 on C^(lam) coefficients.

    x C_k = ((k + 1) C_{k+1} + (k + 2 lam - 1) C_{k-1}) / (2 (k + lam)).
    """
    lam = _check_lam(lam)
    i = np.arange(n, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        sub = np.where(i >= 1, i / (2 * (i - 1 + lam)), 0.0)
    sup = (i + 2 * lam) / (2 * (i + 1 + lam))
    return BandedMatrix.from_diagonals({-1: sub, 1: sup}, (n, n))


def mult_op(f: LegendreSeries, n: int, lam=None) -> BandedMatrix:
    """Multiplication by f on C^(lam) coefficients, where f is given in C^(lam).

    Sums f_k C_k^(lam)(J) by Clenshaw's recurrence with the Jacobi matrix J
    as argument; built at size n + deg(f) + 1 and cropped so the leading
    block is exact.

    Raises:
        DegreeError: If 2 deg(f) + 2 > n (the band would be clipped).
    """
    lam = f.lam if lam is None else _check_lam(lam)
    if lam != f.lam:
        raise ValueError(f"series is in C^({f.lam}), operator requested on C^({lam})")
    c = f.coeffs
    m = c.size - 1
    if 2 * m + 2 > n:
        raise DegreeError(f"multiplier of degree {m} needs n >= {2 * m + 2}, got {n}")
    big = n + m + 1
    J = jacobi_op(lam, big)
    I = BandedMatrix.identity(big)
    b1 = BandedMatrix.zeros((big, big))
    b2 = BandedMatrix.zeros((big, big))
    for k in range(m, -1, -1):
        alpha = 2.0 * (k + lam) / (k + 1)
        beta_next = -(k + 2 * lam) / (k + 2)
        b1, b2 = I * c[k] + alpha * band_mul(J, b1) + beta_next * b2, b1
    return b1.crop(n).tighten() if m > 0 else b1.crop(n)


def flip_op(n: int) -> BandedMatrix:
    """diag(1, -1, 1, -1, ...): coefficients of t -> y(T - t)."""
    return BandedMatrix.from_diagonals({0: np.where(np.arange(n) % 2 == 0, 1.0, -1.0)}, (n, n))


def constraint_row(kind: str, n: int, domain=1.0, t0=None) -> np.ndarray:
    """Dense row for a linear functional on the first n Legendre coefficients.

    Args:
        kind: ``"eval"`` (y(t0)), ``"deriv"`` (y'(t0)) or ``"mean"``
            (the integral of y over [0, T]).
        n: Number of coefficients.
        domain: Interval.
        t0: Evaluation point for ``eval`` and ``deriv``.
    """
    dom = _as_domain(domain)
    if kind == "mean":
        row = np.zeros(n)
        row[0] = dom.T
        return row
    if kind not in ("eval", "deriv"):
        raise ValueError(f"unknown constraint kind {kind!r}")
    if t0 is None:
        raise ValueError(f"{kind} constraint needs a point t0")
    t0 = float(t0)
    if not 0.0 <= t0 <= dom.T:
        raise DomainError(f"constraint point {t0!r} lies outside [0, {dom.T!r}]")
    x = float(dom.to_unit(t0))
    p = np.zeros(n)
    p[0] = 1.0
    if n > 1:
        p[1] = x
    for k in range(1, n - 1):
        p[k + 1] = ((2 * k + 1) * x * p[k] - k * p[k - 1]) / (k + 1)
    if kind == "eval":
        return p
    # P'_{k+1} = P'_{k-1} + (2k + 1) P_k on [-1, 1], then chain rule
    dp = np.zeros(n)
    if n > 1:
        dp[1] = 1.0
    for k in range(1, n - 1):
        dp[k + 1] = dp[k - 1] + (2 * k + 1) * p[k]
    return dp * (2.0 / dom.T)
