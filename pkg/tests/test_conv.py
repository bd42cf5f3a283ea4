import warnings

import numpy as np
import pytest

from idect.approx import Domain, LegendreSeries, approximate, legendre_coeffs_quadrature
from idect.conv import (
    KernelPair,
    adaptive_gauss_legendre,
    fredholm_op,
    fredholm_oracle,
    recurrence_residual,
    volterra_op,
    volterra_oracle,
    weighted_integral_block,
)
from idect.errors import DegreeError, DomainMismatch, MissingFlippedKernel, TruncationError
from idect.ops import cumint_op


def basis(n, dom):
    c = np.zeros(n + 1)
    c[n] = 1.0
    return LegendreSeries(dom, c)


def column(A, n, size=None):
    e = np.zeros(A.shape[1])
    e[n] = 1.0
    return A @ e


def scaled_symmetry_error(V, m):
    D = V.to_dense()
    n = D.shape[0]
    lim = n - m - 3
    j, c = np.meshgrid(np.arange(lim), np.arange(lim), indexing="ij")
    ref = (-1.0) ** (j + c) * (2 * j + 1) / (2 * c + 1) * D[c, j]
    return np.abs(D[:lim, :lim] - ref).max() / np.abs(D).max()


class TestQuadrature:
    def test_polynomial_exact(self):
        assert adaptive_gauss_legendre(lambda s: s**5, 0.0, 2.0) == pytest.approx(64 / 6, rel=1e-15)

    def test_peaked(self):
        val = adaptive_gauss_legendre(lambda s: 1 / (1e-4 + s * s), -1.0, 1.0)
        assert val == pytest.approx(2 * np.arctan(100) * 100, rel=1e-12)

    def test_empty(self):
        assert adaptive_gauss_legendre(np.exp, 0.5, 0.5) == 0.0


class TestVolterraOracle:
    @pytest.mark.parametrize("t", [0.0, 0.3, 1.0])
    def test_unit(self, t):
        assert volterra_oracle(lambda u: np.ones_like(u), lambda s: np.ones_like(s), 1.0, t) == pytest.approx(t, abs=1e-15)
        assert volterra_oracle(lambda u: np.ones_like(u), lambda s: s, 1.0, t) == pytest.approx(t * t / 2, abs=1e-15)

    def test_matches_operator(self, unit):
        k = approximate(lambda u: np.exp(-u), unit)
        y = basis(3, unit)
        V = volterra_op(k, 30)
        got = LegendreSeries(unit, column(V, 3))(0.7)
        assert got == pytest.approx(volterra_oracle(lambda u: np.exp(-u), y, unit, 0.7), abs=1e-10)


class TestVolterra:
    def test_unit_kernel_is_cumint(self, unit):
        V = volterra_op(LegendreSeries(unit, [1.0]), 12)
        np.testing.assert_allclose(V.to_dense(), cumint_op(12).to_dense(), atol=1e-16)
        assert V[0, 0] == 0.5 and V[1, 0] == 0.5
        assert V[0, 1] == pytest.approx(-1 / 6)

    def test_scaled_domain_unit_kernel(self):
        d = Domain(3.0)
        V = volterra_op(LegendreSeries(d, [1.0]), 10, d)
        np.testing.assert_allclose(V.to_dense(), cumint_op(10, d).to_dense(), atol=1e-15)

    def test_exp_starting_value(self, unit):
        k01 = legendre_coeffs_quadrature(lambda u: np.exp(-u), unit, 1)
        V = volterra_op(approximate(lambda u: np.exp(-u), unit), 30)
        assert V[0, 0] == pytest.approx(((1 - np.exp(-1)) - k01[1] / 3) / 2, abs=1e-15)
        assert k01[0] == pytest.approx(1 - np.exp(-1), abs=1e-15)

    def test_degree_five_band(self, rng, unit):
        V = volterra_op(LegendreSeries(unit, rng.standard_normal(6)), 40)
        D = V.to_dense()
        assert np.count_nonzero(np.tril(D, -8)) == 0
        assert np.count_nonzero(np.triu(D, 8)) == 0
        # the attained band is m + 1; m + 2 is the stated bound
        assert np.abs(np.diag(D, -6)).max() > 0
        assert not np.diag(D, -7).any()

    @pytest.mark.parametrize("m", [0, 1, 3, 8])
    def test_scaled_symmetry(self, rng, unit, m):
        V = volterra_op(LegendreSeries(unit, rng.standard_normal(m + 1)), 50)
        assert scaled_symmetry_error(V, m) <= 1e-13

    def test_recurrence_residual_small(self, unit):
        V = volterra_op(approximate(lambda u: np.exp(-u), unit), 80)
        assert recurrence_residual(V) <= 1e-12

    def test_zero_kernel(self, unit):
        V = volterra_op(LegendreSeries(unit, [0.0]), 10)
        assert not V.to_dense().any()

    def test_truncation_error(self, unit):
        with pytest.raises(TruncationError):
            volterra_op(LegendreSeries(unit, np.ones(5)), 6)

    def test_domain_mismatch(self, unit):
        with pytest.raises(DomainMismatch):
            volterra_op(LegendreSeries(unit, [1.0]), 10, Domain(2.0))

    def test_needs_legendre(self, unit):
        with pytest.raises(ValueError):
            volterra_op(LegendreSeries(unit, [1.0], lam=1.5), 10)

    def test_no_warning_smooth(self, unit):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            volterra_op(approximate(lambda u: np.cos(5 * u), unit), 200)

    def test_quadrature_equivalence(self, rng):
        dom = Domain(1.5)
        worst = 0.0
        for _ in range(6):
            k = LegendreSeries(dom, rng.standard_normal(int(rng.integers(1, 8))))
            V = volterra_op(k, 30, dom)
            for n in range(6):
                out = LegendreSeries(dom, column(V, n))
                for t in np.linspace(0, 1.5, 10):
                    ref = volterra_oracle(k, basis(n, dom), dom, t)
                    worst = max(worst, abs(out(t) - ref))
        assert worst <= 1e-10

    def test_action_on_exp(self, unit):
        # int_0^t e^{-(t-s)} e^{s} ds = sinh(t)
        k = approximate(lambda u: np.exp(-u), unit)
        y = approximate(np.exp, unit)
        V = volterra_op(k, 40)
        c = np.concatenate([y.coeffs, np.zeros(40 - len(y))])
        t = np.linspace(0, 1, 100)
        assert np.abs(LegendreSeries(unit, V @ c)(t) - np.sinh(t)).max() <= 1e-14


class TestFredholm:
    def test_unit_kernel(self, unit):
        one = LegendreSeries(unit, [1.0])
        F = fredholm_op(KernelPair(one, one), 10).to_dense()
        expect = np.zeros((10, 10))
        expect[0, 0] = 1.0
        np.testing.assert_allclose(F, expect, atol=1e-15)

    def test_exp_quadratic(self, unit):
        pair = KernelPair(approximate(lambda u: np.exp(-u), unit), approximate(np.exp, unit))
        F = fredholm_op(pair, 40)
        c = np.zeros(40)
        c[:3] = [1 / 3, 1 / 2, 1 / 6]
        got = LegendreSeries(unit, F @ c)(0.3)
        ref = fredholm_oracle(lambda u: np.exp(-u), lambda s: s * s, unit, 0.3)
        assert got == pytest.approx(ref, abs=1e-10)

    def test_abs_mode_linear(self, unit):
        F = fredholm_op(KernelPair(LegendreSeries(unit, [0.5, 0.5]), abs_mode=True), 10)
        t = np.linspace(0, 1, 20)
        out = LegendreSeries(unit, column(F, 0))(t)
        np.testing.assert_allclose(out, t * t - t + 0.5, atol=1e-12)
        ref = [fredholm_oracle(lambda u: u, lambda s: np.ones_like(s), unit, ti, abs_mode=True) for ti in t]
        np.testing.assert_allclose(out, ref, atol=1e-12)

    def test_missing_flip(self, unit):
        with pytest.raises(MissingFlippedKernel):
            fredholm_op(KernelPair(LegendreSeries(unit, [1.0])), 10)

    def test_abs_rejects_flip(self, unit):
        one = LegendreSeries(unit, [1.0])
        with pytest.raises(ValueError):
            KernelPair(one, one, abs_mode=True)

    def test_pair_domain_mismatch(self, unit):
        with pytest.raises(DomainMismatch):
            KernelPair(LegendreSeries(unit, [1.0]), LegendreSeries(Domain(2.0), [1.0]))

    def test_columns_against_projection(self, unit):
        # Legendre projection of int_0^T k(t - s) P_n(s) ds, all by quadrature
        kfun = lambda u: np.cos(2 * u) + 0.3 * u  # noqa: E731
        pair = KernelPair(approximate(kfun, unit), approximate(lambda u: kfun(-u), unit))
        F = fredholm_op(pair, 40).to_dense()
        for n in range(5):
            y = basis(n, unit)

            def image(t):
                return np.array([fredholm_oracle(kfun, y, unit, ti) for ti in np.atleast_1d(t)])

            ref = legendre_coeffs_quadrature(image, unit, 20)
            assert np.abs(F[:21, n] - ref).max() <= 1e-9


class TestWeightedBlock:
    def test_identity_weights(self, rng):
        Q = cumint_op(20)
        np.testing.assert_array_equal(weighted_integral_block(None, Q, None, 20).to_dense(), Q.to_dense())
        np.testing.assert_array_equal(weighted_integral_block(1.0, Q, 1.0, 20).to_dense(), Q.to_dense())

    def test_zero(self):
        assert not weighted_integral_block(0.0, cumint_op(10), None, 10).to_dense().any()

    def test_separable_exp(self, unit):
        # e^t int_0^t e^{-s} y(s) ds is convolution with e^u
        n, big = 8, 40
        B = weighted_integral_block(approximate(np.exp, unit), cumint_op(big), approximate(lambda s: np.exp(-s), unit), n)
        V = volterra_op(approximate(np.exp, unit), big).to_dense()
        np.testing.assert_allclose(B.to_dense()[:, :6], V[:n, :6], atol=1e-11)
        for col in range(6):
            y = basis(col, unit)

            def image(t):
                return np.array([volterra_oracle(np.exp, y, unit, ti) for ti in np.atleast_1d(t)])

            ref = legendre_coeffs_quadrature(image, unit, n - 1)
            np.testing.assert_allclose(B.to_dense()[:, col], ref, atol=1e-11)

    def test_core_too_small(self, unit):
        with pytest.raises(DegreeError):
            weighted_integral_block(None, cumint_op(5), None, 8)
