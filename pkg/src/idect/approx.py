"""Mapped Legendre and ultraspherical series on an interval [0, T].

A function on [0, T] is represented by the coefficients of

    y(t) = sum_n c_n C_n^(lam)(2 t / T - 1),

where lam = 1/2 gives the Legendre basis.  Coefficients are built by
interpolating at Chebyshev points, converting the Chebyshev coefficients to
Legendre coefficients and chopping the tail once it has decayed below a
relative tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.fft import dct, idct
from scipy.special import roots_legendre

from .errors import BasisMismatch, DomainError, ResolutionFailure

__all__ = [
    "Domain",
    "LegendreSeries",
    "approximate",
    "legendre_coeffs_quadrature",
    "evaluate",
    "cheb_to_leg",
    "leg_to_cheb",
    "truncate",
    "pad",
    "legendre_vandermonde",
]

DEFAULT_TOL = 1e-14
DEFAULT_MAX_DEGREE = 4096
_START_DEGREE = 16


@dataclass(frozen=True)
class Domain:
    """The interval [0, T]."""

    T: float = 1.0

    def __post_init__(self):
        T = float(self.T)
        if not np.isfinite(T) or T <= 0:
            raise DomainError(f"domain length must be positive and finite, got {self.T!r}")
        object.__setattr__(self, "T", T)

    def to_unit(self, t):
        """Map t in [0, T] to x in [-1, 1]."""
        return 2.0 * np.asarray(t, dtype=float) / self.T - 1.0

    def from_unit(self, x):
        return 0.5 * self.T * (np.asarray(x, dtype=float) + 1.0)

    def check(self, t, what="point"):
        """Return t as an array clipped to [0, T]; refuse anything outside.

        A few ulps of overshoot (typically from computing ``T - t``) are
        tolerated and clipped.
        """
        t = np.asarray(t, dtype=float)
        slack = 8 * np.finfo(float).eps * self.T
        bad = ~np.isfinite(t) | (t < -slack) | (t > self.T + slack)
        if np.any(bad):
            first = np.atleast_1d(t)[np.atleast_1d(bad)][0]
            raise DomainError(f"{what} {first!r} lies outside [0, {self.T!r}]")
        return np.clip(t, 0.0, self.T)


@dataclass(frozen=True, eq=False)
class LegendreSeries:
    """Coefficients of a function in a mapped ultraspherical basis.

    Attributes:
        domain: Interval on which the series lives.
        coeffs: Coefficient vector; index 0 is the constant term.
        lam: Ultraspherical parameter (0.5 for Legendre, 1.5, 2.5, ...).
    """

    domain: Domain
    coeffs: np.ndarray
    lam: float = 0.5

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float).ravel()
        if c.size == 0:
            c = np.zeros(1)
        if not np.all(np.isfinite(c)):
            raise ValueError("series coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        lam = float(self.lam)
        if lam <= 0 or (2 * lam) % 2 != 1:
            raise ValueError(f"lam must be a positive half-integer, got {self.lam!r}")
        object.__setattr__(self, "lam", lam)

    def __len__(self):
        return self.coeffs.size

    @property
    def degree(self):
        return self.coeffs.size - 1

    def __call__(self, t):
        return evaluate(self, t)

    def _check_compatible(self, other):
        if not isinstance(other, LegendreSeries):
            return NotImplemented
        if other.lam != self.lam:
            raise BasisMismatch(f"cannot combine C^({self.lam}) and C^({other.lam}) series")
        if other.domain != self.domain:
            raise BasisMismatch(f"cannot combine series on {self.domain} and {other.domain}")
        return None

    def __add__(self, other):
        if (r := self._check_compatible(other)) is NotImplemented:
            return r
        n = max(len(self), len(other))
        return LegendreSeries(
            self.domain, pad(self, n - 1).coeffs + pad(other, n - 1).coeffs, self.lam
        )

    def __sub__(self, other):
        if (r := self._check_compatible(other)) is NotImplemented:
            return r
        return self + (-other)

    def __neg__(self):
        return LegendreSeries(self.domain, -self.coeffs, self.lam)

    def __mul__(self, scalar):
        if isinstance(scalar, LegendreSeries):
            return NotImplemented
        return LegendreSeries(self.domain, float(scalar) * self.coeffs, self.lam)

    __rmul__ = __mul__

    def __repr__(self):
        return (
            f"LegendreSeries(T={self.domain.T}, lam={self.lam}, "
            f"degree={self.degree}, coeffs={np.array2string(self.coeffs[:6], precision=4)}"
            f"{'...' if len(self) > 6 else ''})"
        )


def _sample(f: Callable, t: np.ndarray) -> np.ndarray:
    vals = np.asarray(f(t), dtype=float)
    if vals.ndim == 0:
        vals = np.full(t.shape, float(vals))
    if vals.shape != t.shape:
        raise ValueError(f"function returned shape {vals.shape}, expected {t.shape}")
    if not np.all(np.isfinite(vals)):
        bad = t[~np.isfinite(vals)][0]
        raise ResolutionFailure(f"function is not finite at t = {bad!r}")
    return vals


def _cheb_points(n: int) -> np.ndarray:
    """Chebyshev points of the first kind, cos(pi (j + 1/2) / n), j = 0..n-1."""
    return np.cos(np.pi * (np.arange(n) + 0.5) / n)


def _vals_to_cheb(vals: np.ndarray) -> np.ndarray:
    n = vals.size
    c = dct(vals, type=2) / n
    c[0] /= 2
    return c


def _cheb_to_vals(coeffs: np.ndarray) -> np.ndarray:
    c = np.array(coeffs, dtype=float)
    n = c.size
    c[0] *= 2
    return idct(c, type=2) * n / 2


def legendre_vandermonde(x, n: int) -> np.ndarray:
    """Unmapped Legendre polynomials P_0..P_{n-1} at x, shape (len(x), n)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    V = np.empty((x.size, max(n, 1)))
    V[:, 0] = 1.0
    if n > 1:
        V[:, 1] = x
    for k in range(1, n - 1):
        V[:, k + 1] = ((2 * k + 1) * x * V[:, k] - k * V[:, k - 1]) / (k + 1)
    return V[:, :n]


def _gauss_legendre(m: int):
    x, w = roots_legendre(m)
    return x, w


def _legendre_project(x, w, vals, n):
    """Legendre coefficients 0..n-1 of data sampled at Gauss-Legendre nodes."""
    out = np.empty(n)
    wv = w * vals
    p_prev = np.ones_like(x)
    out[0] = 0.5 * np.dot(p_prev, wv)
    if n == 1:
        return out
    p = x.copy()
    out[1] = 1.5 * np.dot(p, wv)
    for k in range(1, n - 1):
        p_prev, p = p, ((2 * k + 1) * x * p - k * p_prev) / (k + 1)
        out[k + 1] = (k + 1.5) * np.dot(p, wv)
    return out


def _lambda_tables(n: int):
    """Lambda(z) = Gamma(z + 1/2) / Gamma(z + 1) at z = 0..n and z = 1/2..n + 1/2."""
    j = np.arange(n + 1, dtype=float)
    ints = np.empty(n + 1)
    halves = np.empty(n + 1)
    ints[0] = np.sqrt(np.pi)
    halves[0] = 2.0 / np.sqrt(np.pi)
    ints[1:] = ints[0] * np.cumprod((j[:-1] + 0.5) / (j[:-1] + 1.0))
    halves[1:] = halves[0] * np.cumprod((j[:-1] + 1.0) / (j[:-1] + 1.5))
    return ints, halves


def cheb_to_leg(cheb_coeffs) -> np.ndarray:
    """Convert first-kind Chebyshev coefficients on [-1, 1] to Legendre coefficients.

    Uses the closed-form connection coefficients

        P_n part of T_k = -k (n + 1/2) Lambda((k-n-2)/2) Lambda((k+n-1)/2)
                          / ((k + n + 1)(k - n)),   k - n even, k > n,

    with diagonal sqrt(pi) / (2 Lambda(n)), summed directly in O(n^2).
    """
    c = np.atleast_1d(np.asarray(cheb_coeffs, dtype=float))
    n_coef = c.size
    lam_int, lam_half = _lambda_tables(n_coef)
    out = np.empty(n_coef)
    for n in range(n_coef):
        diag = 1.0 if n == 0 else np.sqrt(np.pi) / (2.0 * lam_int[n])
        k = np.arange(n + 2, n_coef, 2)
        if k.size:
            w = (
                -k * (n + 0.5) / ((k + n + 1.0) * (k - n))
                * lam_int[(k - n - 2) // 2]
                * lam_half[(k + n - 2) // 2]
            )
            out[n] = diag * c[n] + np.dot(w, c[k])
        else:
            out[n] = diag * c[n]
    return out


def leg_to_cheb(leg_coeffs) -> np.ndarray:
    """Inverse of :func:`cheb_to_leg`."""
    c = np.atleast_1d(np.asarray(leg_coeffs, dtype=float))
    n = c.size
    x = _cheb_points(n)
    return _vals_to_cheb(np.polynomial.legendre.legval(x, c))


def truncate(series: LegendreSeries, tol: float = DEFAULT_TOL) -> LegendreSeries:
    """Drop trailing coefficients with ``|c| <= tol * max|c|`` (keeps at least one)."""
    c = series.coeffs
    scale = np.max(np.abs(c))
    if scale == 0:
        return LegendreSeries(series.domain, [0.0], series.lam)
    keep = np.nonzero(np.abs(c) > tol * scale)[0]
    last = keep[-1] + 1 if keep.size else 1
    return LegendreSeries(series.domain, c[:last], series.lam)


def pad(series: LegendreSeries, N: int) -> LegendreSeries:
    """Zero-extend to length N + 1.  Longer series are returned unchanged."""
    c = series.coeffs
    if c.size >= N + 1:
        return series
    out = np.zeros(N + 1)
    out[: c.size] = c
    return LegendreSeries(series.domain, out, series.lam)


def noise_floor(n: int) -> float:
    """Relative round-off level of a degree-n values-to-Legendre transform."""
    return np.finfo(float).eps * n / 8.0


def _decayed(c: np.ndarray, tol: float, tail: int = 3) -> bool:
    scale = np.max(np.abs(c))
    if scale == 0:
        return True
    return bool(np.all(np.abs(c[-tail:]) <= tol * scale))


def approximate(
    f: Callable,
    domain: Domain | float = 1.0,
    tol: float = DEFAULT_TOL,
    max_degree: int = DEFAULT_MAX_DEGREE,
) -> LegendreSeries:
    """Adaptive Legendre approximation of a function on [0, T].

    Args:
        f: Vectorized callable; receives an array of t values in (0, T).
        domain: Interval, or its length T.
        tol: Relative tolerance for the trailing-coefficient certificate.
        max_degree: Largest degree tried before giving up.

    Returns:
        A chopped Legendre series (lam = 1/2).

    Raises:
        ResolutionFailure: If no degree up to ``max_degree`` resolves f.
    """
    if not isinstance(domain, Domain):
        domain = Domain(domain)
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = _START_DEGREE
    while True:
        n = min(n, max_degree)
        x = _cheb_points(n + 1)
        vals = _sample(f, domain.from_unit(x))
        leg = cheb_to_leg(_vals_to_cheb(vals))
        # transform round-off grows with n; never chop below it
        eff = max(tol, noise_floor(n))
        if _decayed(leg, eff):
            return truncate(LegendreSeries(domain, leg), eff)
        if n >= max_degree:
            raise ResolutionFailure(
                f"coefficients did not decay below {tol:g} by degree {max_degree}"
            )
        n *= 2


def legendre_coeffs_quadrature(f: Callable, domain: Domain | float, N: int) -> np.ndarray:
    """Coefficients 0..N of f by Gauss-Legendre quadrature of the projection integral.

    Uses 2N + 16 nodes.  Intended as an independent check of :func:`approximate`.
    """
    if not isinstance(domain, Domain):
        domain = Domain(domain)
    if N < 0:
        raise ValueError("N must be non-negative")
    x, w = _gauss_legendre(2 * N + 16)
    vals = np.asarray(f(domain.from_unit(x)), dtype=float) * np.ones_like(x)
    return _legendre_project(x, w, vals, N + 1)


def clenshaw(coeffs, lam: float, x):
    """Evaluate sum_n c_n C_n^(lam)(x) for x in [-1, 1] by backward recurrence."""
    c = np.asarray(coeffs, dtype=float)
    x = np.asarray(x, dtype=float)
    b1 = np.zeros_like(x)
    b2 = np.zeros_like(x)
    # C_{k+1} = alpha_k x C_k + beta_k C_{k-1}
    for k in range(c.size - 1, -1, -1):
        alpha = 2.0 * (k + lam) / (k + 1)
        beta_next = -(k + 2 * lam) / (k + 2)
        b1, b2 = c[k] + alpha * x * b1 + beta_next * b2, b1
    return b1


def evaluate(series: LegendreSeries, points) -> np.ndarray:
    """Evaluate a series at points in [0, T] (Clenshaw).  Extrapolation is refused."""
    t = series.domain.check(points)
    return clenshaw(series.coeffs, series.lam, series.domain.to_unit(t))
