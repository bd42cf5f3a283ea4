import numpy as np
import pytest

from idect.errors import DimensionMismatch, SingularSystem
from idect.linalg import (
    AlmostBandedMatrix,
    BandedMatrix,
    aband_matvec,
    aband_solve,
    band_matvec,
    band_mul,
)
from idect.ops import cumint_op, diff_op


def random_banded(rng, n, lo, up, shape=None):
    shape = shape or (n, n)
    A = BandedMatrix(rng.standard_normal((lo + up + 1, shape[0])), lo, up, shape)
    return A


def random_system(rng, n, lo, up, r):
    """Almost-banded system with a dominant diagonal in the global numbering."""
    up = max(up, r)
    B = random_banded(rng, n, lo, up, (n - r, n))
    d = B.diags.copy()
    d[lo + r] += np.sign(d[lo + r]) * (2 + np.abs(d).sum(axis=0))
    B = BandedMatrix(d, lo, up, (n - r, n))
    dense = rng.standard_normal((r, n))
    for i in range(r):
        dense[i, i] += np.sign(dense[i, i]) * (2 + np.abs(dense[i]).sum())
    return AlmostBandedMatrix(dense, B)


class TestBanded:
    def test_round_trip_dense(self, rng):
        A = random_banded(rng, 9, 2, 3)
        D = A.to_dense()
        assert np.count_nonzero(np.tril(D, -3)) == 0
        assert np.count_nonzero(np.triu(D, 4)) == 0
        B = BandedMatrix.from_dense(D, 2, 3)
        np.testing.assert_array_equal(B.to_dense(), D)

    def test_from_dense_rejects_outside(self):
        D = np.eye(4)
        D[3, 0] = 1.0
        with pytest.raises(ValueError):
            BandedMatrix.from_dense(D, 1, 1)

    def test_getitem_and_diagonal(self):
        # values are indexed by row; slots outside the matrix are dropped
        A = BandedMatrix.from_diagonals({-1: [9, 1, 2, 3], 2: [7, 8, 9, 9]}, (4, 4))
        assert A[1, 0] == 1 and A[3, 2] == 3 and A[0, 2] == 7 and A[1, 3] == 8
        assert A[0, 3] == 0
        np.testing.assert_array_equal(A.diagonal(2), [7, 8, 0, 0])
        np.testing.assert_array_equal(A.diagonal(-1), [0, 1, 2, 3])
        assert np.count_nonzero(A.to_dense()) == 5

    def test_tighten(self):
        A = BandedMatrix.identity(5).widen(3, 4)
        assert A.bandwidths == (3, 4)
        assert A.tighten().bandwidths == (0, 0)

    def test_crop(self, rng):
        A = random_banded(rng, 10, 2, 2)
        np.testing.assert_array_equal(A.crop(6, 8).to_dense(), A.to_dense()[:6, :8])

    def test_flip_signs(self, rng):
        A = random_banded(rng, 7, 2, 1)
        s = (-1.0) ** np.arange(7)
        np.testing.assert_allclose(A.flip_signs().to_dense(), s[:, None] * A.to_dense() * s[None, :])

    def test_arithmetic(self, rng):
        A = random_banded(rng, 8, 1, 2)
        B = random_banded(rng, 8, 3, 0)
        np.testing.assert_allclose((A + B).to_dense(), A.to_dense() + B.to_dense())
        np.testing.assert_allclose((A - 2 * B).to_dense(), A.to_dense() - 2 * B.to_dense())

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            BandedMatrix.identity(3) + BandedMatrix.identity(4)


class TestProducts:
    def test_identity(self, rng):
        A = random_banded(rng, 12, 2, 3)
        np.testing.assert_array_equal(band_mul(A, BandedMatrix.identity(12)).to_dense(), A.to_dense())

    def test_diagonal(self, rng):
        d, e = rng.standard_normal(6), rng.standard_normal(6)
        P = band_mul(BandedMatrix.from_diagonals({0: d}, (6, 6)), BandedMatrix.from_diagonals({0: e}, (6, 6)))
        np.testing.assert_allclose(P.to_dense(), np.diag(d * e))

    def test_bandwidths_add(self, rng):
        P = band_mul(random_banded(rng, 20, 2, 1), random_banded(rng, 20, 1, 3))
        assert P.bandwidths == (3, 4)

    def test_dense_oracle(self, rng):
        D, Q = diff_op(1, 20), cumint_op(20)
        v = rng.standard_normal(20)
        ref = D.to_dense() @ Q.to_dense() @ v
        np.testing.assert_allclose(band_mul(D, Q) @ v, ref, atol=1e-14)

    @pytest.mark.parametrize("lo, up", [(0, 0), (3, 1), (2, 5)])
    def test_matvec(self, rng, lo, up):
        A = random_banded(rng, 30, lo, up)
        v = rng.standard_normal(30)
        np.testing.assert_allclose(band_matvec(A, v), A.to_dense() @ v, atol=1e-13)

    def test_rectangular_matvec(self, rng):
        A = random_banded(rng, 8, 1, 2, (5, 8))
        v = rng.standard_normal(8)
        np.testing.assert_allclose(band_matvec(A, v), A.to_dense() @ v, atol=1e-14)

    def test_zero(self):
        assert not band_matvec(BandedMatrix.zeros((4, 4)), np.ones(4)).any()

    def test_aband_matvec(self, rng):
        M = random_system(rng, 15, 2, 2, 2)
        v = rng.standard_normal(15)
        np.testing.assert_allclose(aband_matvec(M, v), M.to_dense() @ v, atol=1e-13)

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionMismatch):
            band_mul(random_banded(rng, 4, 1, 1), random_banded(rng, 5, 1, 1))
        with pytest.raises(DimensionMismatch):
            aband_matvec(random_system(rng, 6, 1, 1, 1), np.ones(5))


class TestAlmostBanded:
    def test_structure(self, rng):
        M = random_system(rng, 10, 1, 2, 2)
        assert M.shape == (10, 10) and M.n_dense == 2

    def test_too_many_dense_rows(self):
        with pytest.raises(DimensionMismatch):
            AlmostBandedMatrix(np.ones((9, 20)), BandedMatrix.zeros((11, 20)))

    def test_row_count_mismatch(self):
        with pytest.raises(DimensionMismatch):
            AlmostBandedMatrix(np.ones((1, 5)), BandedMatrix.zeros((5, 5)))

    def test_norm(self, rng):
        M = random_system(rng, 12, 2, 3, 1)
        assert M.norm_inf() == pytest.approx(np.abs(M.to_dense()).sum(axis=1).max())


class TestSolve:
    def test_dense_top_row(self):
        n = 5
        # identity below one dense row of ones
        B = BandedMatrix.from_diagonals({1: np.ones(n - 1)}, (n - 1, n))
        M = AlmostBandedMatrix(np.ones((1, n)), B)
        rhs = np.array([n, 1, 1, 1, 1], dtype=float)
        x = aband_solve(M, rhs)
        assert np.abs(M @ x - rhs).max() <= 1e-13
        np.testing.assert_allclose(x, np.ones(n), atol=1e-14)

    def test_against_dense_lu(self, rng):
        M = random_system(rng, 50, 3, 4, 2)
        b = rng.standard_normal(50)
        np.testing.assert_allclose(aband_solve(M, b), np.linalg.solve(M.to_dense(), b), atol=1e-10)

    def test_random_residuals(self, rng):
        worst = 0.0
        for _ in range(200):
            n = int(rng.integers(16, 513))
            lo, up = int(rng.integers(2, 21)), int(rng.integers(2, 21))
            r = int(rng.integers(0, 4))
            M = random_system(rng, n, lo, up, r)
            b = rng.standard_normal(n)
            x = aband_solve(M, b)
            res = np.abs(M @ x - b).max() / (M.norm_inf() * np.abs(x).max() + np.abs(b).max())
            worst = max(worst, res)
        assert worst <= 1e-11

    def test_no_dense_rows(self, rng):
        M = random_system(rng, 40, 2, 2, 0)
        b = rng.standard_normal(40)
        np.testing.assert_allclose(M @ aband_solve(M, b), b, atol=1e-12)

    def test_singular(self):
        B = BandedMatrix.from_diagonals({0: [1.0, 1.0, 0.0, 1.0]}, (4, 4))
        with pytest.raises(SingularSystem) as info:
            aband_solve(AlmostBandedMatrix(np.zeros((0, 4)), B), np.ones(4))
        assert info.value.column == 2

    def test_rhs_shape(self, rng):
        with pytest.raises(DimensionMismatch):
            aband_solve(random_system(rng, 6, 1, 1, 1), np.ones(7))
