"""Banded and almost-banded matrices.

``BandedMatrix`` stores a (possibly rectangular) matrix by diagonals:
``diags[k, i]`` holds ``A[i, i + k - lower]`` for row ``i``.

``AlmostBandedMatrix`` stacks a handful of dense rows on top of a banded
block; it is the shape of every discretized problem in this package, and is
solved by a Givens QR that tracks fill-in from the dense rows as a small
linear combination of them, for O(n (bw + r)^2) work.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .errors import DimensionMismatch, SingularSystem

__all__ = [
    "BandedMatrix",
    "AlmostBandedMatrix",
    "band_mul",
    "band_matvec",
    "aband_matvec",
    "aband_solve",
]

MAX_DENSE_ROWS = 8


class BandedMatrix:
    """Matrix with ``lower`` subdiagonals and ``upper`` superdiagonals.

    Entries outside the band are zero by construction.
    """

    __slots__ = ("shape", "lower", "upper", "diags")

    def __init__(self, diags, lower: int, upper: int, shape):
        n_rows, n_cols = (int(s) for s in shape)
        diags = np.array(diags, dtype=float)
        if diags.shape != (lower + upper + 1, n_rows):
            raise DimensionMismatch(
                f"diagonal storage has shape {diags.shape}, expected {(lower + upper + 1, n_rows)}"
            )
        # zero slots that fall outside the matrix
        rows = np.arange(n_rows)
        for k in range(lower + upper + 1):
            cols = rows + k - lower
            diags[k, (cols < 0) | (cols >= n_cols)] = 0.0
        diags.setflags(write=False)
        self.shape = (n_rows, n_cols)
        self.lower = int(lower)
        self.upper = int(upper)
        self.diags = diags

    # ------------------------------------------------------------ constructors

    @classmethod
    def zeros(cls, shape, lower=0, upper=0):
        return cls(np.zeros((lower + upper + 1, shape[0])), lower, upper, shape)

    @classmethod
    def identity(cls, n, scale=1.0):
        return cls(np.full((1, n), float(scale)), 0, 0, (n, n))

    @classmethod
    def from_diagonals(cls, offsets: dict, shape):
        """Build from ``{offset: values}``; ``values[i]`` is the entry in row i.

        Offset is ``col - row``.  Values may be scalars or arrays of length
        ``n_rows`` (entries past the edge of the matrix are ignored).
        """
        n_rows = shape[0]
        lower = max([0] + [-d for d in offsets])
        upper = max([0] + [d for d in offsets])
        diags = np.zeros((lower + upper + 1, n_rows))
        for d, v in offsets.items():
            v = np.broadcast_to(np.asarray(v, dtype=float), (n_rows,))
            diags[d + lower] += v
        return cls(diags, lower, upper, shape)

    @classmethod
    def from_dense(cls, A, lower=None, upper=None, check=True):
        A = np.asarray(A, dtype=float)
        n_rows, n_cols = A.shape
        if lower is None or upper is None:
            nz_r, nz_c = np.nonzero(A)
            off = nz_c - nz_r
            lower = int(max(0, -off.min())) if off.size else 0
            upper = int(max(0, off.max())) if off.size else 0
        rows = np.arange(n_rows)
        diags = np.zeros((lower + upper + 1, n_rows))
        for k in range(lower + upper + 1):
            cols = rows + k - lower
            ok = (cols >= 0) & (cols < n_cols)
            diags[k, ok] = A[rows[ok], cols[ok]]
        out = cls(diags, lower, upper, (n_rows, n_cols))
        if check and not np.array_equal(out.to_dense(), A):
            raise ValueError("matrix has nonzeros outside the declared band")
        return out

    # ---------------------------------------------------------------- access

    @property
    def bandwidths(self):
        return self.lower, self.upper

    def diagonal(self, offset=0) -> np.ndarray:
        """Entries ``A[i, i + offset]`` indexed by row (zero where out of range)."""
        if -self.lower <= offset <= self.upper:
            return self.diags[offset + self.lower]
        return np.zeros(self.shape[0])

    def __getitem__(self, idx):
        i, j = idx
        n_rows, n_cols = self.shape
        if not (0 <= i < n_rows and 0 <= j < n_cols):
            raise IndexError(idx)
        d = j - i
        if -self.lower <= d <= self.upper:
            return float(self.diags[d + self.lower, i])
        return 0.0

    def to_dense(self) -> np.ndarray:
        n_rows, n_cols = self.shape
        A = np.zeros((n_rows, n_cols))
        rows = np.arange(n_rows)
        for k in range(self.lower + self.upper + 1):
            cols = rows + k - self.lower
            ok = (cols >= 0) & (cols < n_cols)
            A[rows[ok], cols[ok]] = self.diags[k, ok]
        return A

    def tight_bandwidths(self, threshold=0.0):
        """Smallest (lower, upper) containing every entry with |a| > threshold."""
        lo = up = 0
        for k in range(self.lower + self.upper + 1):
            if np.any(np.abs(self.diags[k]) > threshold):
                d = k - self.lower
                lo = max(lo, -d)
                up = max(up, d)
        return lo, up

    def tighten(self, threshold=0.0) -> "BandedMatrix":
        lo, up = self.tight_bandwidths(threshold)
        k0 = self.lower - lo
        return BandedMatrix(self.diags[k0 : k0 + lo + up + 1], lo, up, self.shape)

    def widen(self, lower, upper) -> "BandedMatrix":
        lower = max(lower, self.lower)
        upper = max(upper, self.upper)
        diags = np.zeros((lower + upper + 1, self.shape[0]))
        k0 = lower - self.lower
        diags[k0 : k0 + self.lower + self.upper + 1] = self.diags
        return BandedMatrix(diags, lower, upper, self.shape)

    def crop(self, n_rows, n_cols=None) -> "BandedMatrix":
        """Leading ``n_rows x n_cols`` block."""
        n_cols = n_rows if n_cols is None else n_cols
        if n_rows > self.shape[0] or n_cols > self.shape[1]:
            raise DimensionMismatch(f"cannot crop {self.shape} to {(n_rows, n_cols)}")
        return BandedMatrix(self.diags[:, :n_rows], self.lower, self.upper, (n_rows, n_cols))

    def flip_signs(self) -> "BandedMatrix":
        """Entries multiplied by (-1)^(i+j), i.e. D A D with D = diag(1, -1, 1, ...)."""
        sign = np.where(np.arange(-self.lower, self.upper + 1) % 2 == 0, 1.0, -1.0)
        return BandedMatrix(self.diags * sign[:, None], self.lower, self.upper, self.shape)

    # ------------------------------------------------------------- arithmetic

    def _same_shape(self, other):
        if self.shape != other.shape:
            raise DimensionMismatch(f"shapes {self.shape} and {other.shape} differ")

    def __add__(self, other):
        if not isinstance(other, BandedMatrix):
            return NotImplemented
        self._same_shape(other)
        lo, up = max(self.lower, other.lower), max(self.upper, other.upper)
        a, b = self.widen(lo, up), other.widen(lo, up)
        return BandedMatrix(a.diags + b.diags, lo, up, self.shape)

    def __sub__(self, other):
        if not isinstance(other, BandedMatrix):
            return NotImplemented
        return self + (-other)

    def __neg__(self):
        return BandedMatrix(-self.diags, self.lower, self.upper, self.shape)

    def __mul__(self, scalar):
        if isinstance(scalar, (BandedMatrix, np.ndarray)):
            return NotImplemented
        return BandedMatrix(float(scalar) * self.diags, self.lower, self.upper, self.shape)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, BandedMatrix):
            return band_mul(self, other)
        return band_matvec(self, other)

    def __repr__(self):
        return f"BandedMatrix(shape={self.shape}, lower={self.lower}, upper={self.upper})"


def band_matvec(A: BandedMatrix, v) -> np.ndarray:
    """``A @ v`` in O(n * bandwidth)."""
    v = np.asarray(v, dtype=float)
    n_rows, n_cols = A.shape
    if v.shape[0] != n_cols:
        raise DimensionMismatch(f"matrix has {n_cols} columns, vector has length {v.shape[0]}")
    out = np.zeros((n_rows,) + v.shape[1:])
    for k in range(A.lower + A.upper + 1):
        d = k - A.lower
        i0 = max(0, -d)
        i1 = min(n_rows, n_cols - d)
        if i1 <= i0:
            continue
        coef = A.diags[k, i0:i1]
        if v.ndim > 1:
            coef = coef[:, None]
        out[i0:i1] += coef * v[i0 + d : i1 + d]
    return out


def band_mul(A: BandedMatrix, B: BandedMatrix) -> BandedMatrix:
    """Exact product of banded matrices; bandwidths add."""
    if A.shape[1] != B.shape[0]:
        raise DimensionMismatch(f"cannot multiply {A.shape} by {B.shape}")
    n_rows = A.shape[0]
    lo, up = A.lower + B.lower, A.upper + B.upper
    out = np.zeros((lo + up + 1, n_rows))
    rows = np.arange(n_rows)
    for ka in range(A.lower + A.upper + 1):
        da = ka - A.lower
        mid = rows + da  # row of B
        ok = (mid >= 0) & (mid < B.shape[0])
        if not np.any(ok):
            continue
        a = A.diags[ka]
        for kb in range(B.lower + B.upper + 1):
            db = kb - B.lower
            contrib = np.zeros(n_rows)
            contrib[ok] = a[ok] * B.diags[kb, mid[ok]]
            out[da + db + lo] += contrib
    return BandedMatrix(out, lo, up, (n_rows, B.shape[1]))


class AlmostBandedMatrix:
    """Dense rows stacked on top of a banded block.

    Attributes:
        dense_rows: Array of shape (r, n).
        banded: BandedMatrix of shape (n - r, n); its row i is global row r + i.
    """

    __slots__ = ("dense_rows", "banded")

    def __init__(self, dense_rows, banded: BandedMatrix):
        n = banded.shape[1]
        dense = np.asarray(dense_rows, dtype=float).reshape(-1, n)
        if dense.shape[0] > MAX_DENSE_ROWS:
            raise DimensionMismatch(f"at most {MAX_DENSE_ROWS} dense rows are supported")
        if dense.shape[0] + banded.shape[0] != n:
            raise DimensionMismatch(
                f"{dense.shape[0]} dense + {banded.shape[0]} banded rows for {n} columns"
            )
        dense = dense.copy()
        dense.setflags(write=False)
        self.dense_rows = dense
        self.banded = banded

    @property
    def n(self):
        return self.banded.shape[1]

    @property
    def shape(self):
        return (self.n, self.n)

    @property
    def n_dense(self):
        return self.dense_rows.shape[0]

    def to_dense(self) -> np.ndarray:
        return np.vstack([self.dense_rows, self.banded.to_dense()])

    def norm_inf(self) -> float:
        rows = np.abs(self.dense_rows).sum(axis=1) if self.n_dense else np.zeros(0)
        band = np.abs(self.banded.diags).sum(axis=0)
        return float(max(rows.max(initial=0.0), band.max(initial=0.0)))

    def __matmul__(self, v):
        return aband_matvec(self, v)

    def __repr__(self):
        return (
            f"AlmostBandedMatrix(n={self.n}, dense_rows={self.n_dense}, "
            f"lower={self.banded.lower}, upper={self.banded.upper})"
        )


def aband_matvec(M: AlmostBandedMatrix, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape[0] != M.n:
        raise DimensionMismatch(f"matrix has {M.n} columns, vector has length {v.shape[0]}")
    return np.concatenate([M.dense_rows @ v, band_matvec(M.banded, v)])


_FLUSH = 1e-280


@njit(cache=True)
def _givens_qr_solve(band, C, B, rhs, lower, upper, tiny):
    """In-place Givens QR and back substitution.

    Row g of the working matrix equals ``band[g]`` (entries for columns
    ``g - m .. g - m + width - 1``, m = r + lower) plus ``C[g] @ B``, where B
    holds the original dense rows.  Returns (x, failing column or -1).
    """
    n = rhs.shape[0]
    r = B.shape[0]
    m = r + lower
    reach = lower + upper  # R has this many superdiagonals besides the dense tail
    x = np.zeros(n)
    for k in range(n):
        g_end = min(n, k + m + 1)
        for g in range(k + 1, g_end):
            bg = band[g, k - g + m]
            for q in range(r):
                bg += C[g, q] * B[q, k]
            if bg == 0.0:
                continue
            ak = band[k, m]
            for q in range(r):
                ak += C[k, q] * B[q, k]
            rr = np.hypot(ak, bg)
            c = ak / rr
            s = bg / rr
            c_end = min(n, k + reach + 1)
            for col in range(k, c_end):
                ia = col - k + m
                ib = col - g + m
                xa = band[k, ia]
                xb = band[g, ib]
                band[k, ia] = c * xa + s * xb
                band[g, ib] = -s * xa + c * xb
            for q in range(r):
                xa = C[k, q]
                xb = C[g, q]
                C[k, q] = c * xa + s * xb
                yb = -s * xa + c * xb
                # multipliers decay geometrically; flush before they go subnormal
                C[g, q] = yb if abs(yb) > _FLUSH else 0.0
            xa = rhs[k]
            xb = rhs[g]
            rhs[k] = c * xa + s * xb
            rhs[g] = -s * xa + c * xb
        piv = band[k, m]
        for q in range(r):
            piv += C[k, q] * B[q, k]
        if not abs(piv) > tiny:
            return x, k
    tail = np.zeros(r)  # sum_{j > i} B[:, j] x_j
    for i in range(n - 1, -1, -1):
        acc = rhs[i]
        c_end = min(n, i + reach + 1)
        for col in range(i + 1, c_end):
            acc -= band[i, col - i + m] * x[col]
        piv = band[i, m]
        for q in range(r):
            acc -= C[i, q] * tail[q]
            piv += C[i, q] * B[q, i]
        x[i] = acc / piv
        for q in range(r):
            tail[q] += B[q, i] * x[i]
    return x, -1


def aband_solve(M: AlmostBandedMatrix, rhs) -> np.ndarray:
    """Solve ``M x = rhs`` by unpivoted Givens QR in O(n (bw + r)^2).

    Raises:
        SingularSystem: A pivot fell below 1e-14 times the largest entry.
    """
    rhs = np.asarray(rhs, dtype=float)
    n = M.n
    if rhs.shape != (n,):
        raise DimensionMismatch(f"rhs has shape {rhs.shape}, expected {(n,)}")
    r = M.n_dense
    lo, up = M.banded.lower, M.banded.upper
    m = r + lo
    width = m + lo + up + 1
    band = np.zeros((n, width))
    # banded row i (global r + i) covers columns i - lo .. i + up -> slots 0..lo+up
    band[r:, : lo + up + 1] = M.banded.diags.T
    C = np.zeros((n, r))
    C[np.arange(r), np.arange(r)] = 1.0
    B = np.ascontiguousarray(M.dense_rows)
    scale = max(np.abs(B).max(initial=0.0), np.abs(M.banded.diags).max(initial=0.0))
    if scale == 0.0:
        raise SingularSystem(0, 0.0)
    x, bad = _givens_qr_solve(band, C, B, rhs.copy(), lo, up, 1e-14 * scale)
    if bad >= 0:
        raise SingularSystem(int(bad))
    return x
