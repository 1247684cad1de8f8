"""Transforms, multipliers, norms and dealiasing on the torus grid."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from scipy.integrate import quad
from hypothesis import strategies as st

from fracscalar.spectral import (
    PhysicalField,
    SpectralField,
    TorusGrid,
    dealias,
    fractional_laplacian,
    hermitian_defect,
    l2_norm,
    laplacian,
    semigroup_apply,
    semigroup_factor,
    single_mode,
    sobolev_norm,
    stream_function,
    to_physical,
    to_spectral,
)


def random_field(grid, seed, smooth=0.75):
    rng = np.random.default_rng(seed)
    f = to_spectral(PhysicalField(grid, rng.standard_normal(grid.shape)))
    return dealias(SpectralField(grid, f.coeffs * (1.0 + grid.ksq) ** -smooth))


class TestGrid:
    def test_rejects_bad_sizes(self):
        with pytest.raises(ValueError):
            TorusGrid(2, 15)
        with pytest.raises(ValueError):
            TorusGrid(4, 16)
        with pytest.raises(ValueError):
            TorusGrid(1, 4)

    def test_index_of_negative_modes(self):
        g = TorusGrid(2, 16)
        assert g.index_of((-1, 2)) == (15, 2)

    def test_dealias_band(self):
        g = TorusGrid(1, 48)
        assert g.dealias_mask[g.index_of((16,))]
        assert not g.dealias_mask[g.index_of((17,))]

    def test_grid_is_hashable_and_frozen(self):
        g = TorusGrid(2, 16)
        assert hash(g) == hash(TorusGrid(2, 16))
        with pytest.raises(Exception):
            g.n = 32


class TestTransforms:
    def test_constant(self):
        g = TorusGrid(2, 16)
        f = to_spectral(PhysicalField(g, np.ones(g.shape)))
        assert f.coeff((0, 0)) == pytest.approx(1.0, abs=1e-14)
        assert np.sum(np.abs(f.coeffs)) == pytest.approx(1.0, abs=1e-12)

    def test_cosine_mode(self):
        g = TorusGrid(2, 16)
        f = SpectralField.from_function(g, lambda x, y: np.cos(x))
        assert f.coeff((1, 0)) == pytest.approx(0.5, abs=1e-12)
        assert f.coeff((-1, 0)) == pytest.approx(0.5, abs=1e-12)
        rest = f.coeffs.copy()
        rest[g.index_of((1, 0))] = rest[g.index_of((-1, 0))] = 0
        assert np.max(np.abs(rest)) < 1e-12

    def test_inverse_of_single_modes(self):
        g = TorusGrid(1, 16)
        c = np.zeros(g.shape, complex)
        c[0] = 1.0
        assert np.allclose(to_physical(SpectralField(g, c)).values, 1.0)
        c[:] = 0
        c[1] = c[-1] = 0.5
        x = g.points[0]
        assert np.allclose(to_physical(SpectralField(g, c)).values, np.cos(x), atol=1e-14)

    def test_rejects_non_finite(self):
        g = TorusGrid(1, 16)
        v = np.zeros(g.shape)
        v[3] = np.nan
        with pytest.raises(ValueError):
            to_spectral(PhysicalField(g, v))

    def test_rejects_asymmetric_coefficients(self):
        g = TorusGrid(1, 16)
        c = np.zeros(g.shape, complex)
        c[1] = 1.0
        with pytest.raises(ValueError, match="Hermitian|symmetr"):
            to_physical(SpectralField(g, c))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 3), st.integers(0, 2**31))
    def test_round_trip(self, d, seed):
        g = TorusGrid(d, 8 if d == 3 else 16)
        v = np.random.default_rng(seed).standard_normal(g.shape)
        f = to_spectral(PhysicalField(g, v))
        assert hermitian_defect(f.coeffs) < 1e-12
        assert np.allclose(to_physical(f).values, v, atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31))
    def test_parseval(self, seed):
        g = TorusGrid(2, 16)
        v = np.random.default_rng(seed).standard_normal(g.shape)
        f = to_spectral(PhysicalField(g, v))
        assert l2_norm(f) == pytest.approx(math.sqrt(np.mean(v**2)), rel=1e-12)


class TestMultipliers:
    def test_fractional_laplacian_on_cos2x(self):
        g = TorusGrid(1, 32)
        f = fractional_laplacian(single_mode(g, (2,)), 1.5)
        x = g.points[0]
        assert np.allclose(to_physical(f).values, 2**1.5 * np.cos(2 * x), atol=1e-12)
        assert 2**1.5 == pytest.approx(2.8284, abs=1e-4)

    def test_constant_is_annihilated(self):
        g = TorusGrid(2, 16)
        f = SpectralField.from_function(g, lambda x, y: 3.0 + 0 * x)
        for alpha in (0.3, 1.0, 2.0):
            assert np.max(np.abs(fractional_laplacian(f, alpha).coeffs)) == 0.0

    def test_alpha_two_is_minus_laplacian(self):
        g = TorusGrid(2, 32)
        f = single_mode(g, (1, 1))
        assert np.array_equal(fractional_laplacian(f, 2.0).coeffs, -laplacian(f).coeffs)
        assert np.allclose(fractional_laplacian(f, 2.0).coeffs, 2 * f.coeffs, atol=1e-15)

    @pytest.mark.parametrize("alpha", [0.0, -1.0, 2.5])
    def test_alpha_out_of_range(self, alpha):
        with pytest.raises(ValueError):
            fractional_laplacian(single_mode(TorusGrid(1, 16), (1,)), alpha)

    def test_semigroup_identity_at_zero(self):
        f = random_field(TorusGrid(2, 16), 1)
        assert np.array_equal(semigroup_apply(f, 0.7, 1.3, 0.0).coeffs, f.coeffs)

    def test_semigroup_single_mode(self):
        g = TorusGrid(2, 16)
        fac = semigroup_factor(g, 1.0, 1.5, 1.0)[g.index_of((1, 1))]
        assert fac == pytest.approx(math.exp(-(2**0.75)), rel=1e-14)
        assert fac == pytest.approx(0.1861, abs=1e-4)

    def test_semigroup_rejects_negative_time(self):
        with pytest.raises(ValueError):
            semigroup_factor(TorusGrid(1, 16), 1.0, 1.0, -0.1)

    @settings(max_examples=40, deadline=None)
    @given(
        st.floats(0.05, 2.0),
        st.floats(0.1, 2.0),
        st.floats(0.0, 1.0),
        st.floats(0.0, 1.0),
        st.integers(0, 2**31),
    )
    def test_semigroup_composition(self, nu, alpha, t, s, seed):
        f = random_field(TorusGrid(2, 16), seed)
        a = semigroup_apply(semigroup_apply(f, nu, alpha, t), nu, alpha, s)
        b = semigroup_apply(f, nu, alpha, t + s)
        assert l2_norm(a - b) <= 1e-12 * l2_norm(f)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.05, 2.0), st.floats(0.1, 2.0), st.floats(0.0, 2.0), st.floats(-1.0, 2.0), st.integers(0, 2**31))
    def test_semigroup_contracts_sobolev_norms(self, nu, alpha, t, s, seed):
        f = random_field(TorusGrid(2, 16), seed)
        g = semigroup_apply(f, nu, alpha, t)
        assert sobolev_norm(g, s) <= sobolev_norm(f, s) * (1 + 1e-13)


class TestNorms:
    @pytest.mark.parametrize("s", [0.0, 0.5, 1.0, 2.0])
    def test_cosine_bessel_norm(self, s):
        f = single_mode(TorusGrid(2, 16), (1, 0))
        assert sobolev_norm(f, s) == pytest.approx(2 ** ((s - 1) / 2), rel=1e-13)

    def test_s0_is_l2(self):
        f = random_field(TorusGrid(2, 16), 7)
        v = to_physical(f).values
        assert sobolev_norm(f, 0.0) == pytest.approx(math.sqrt(np.mean(v**2)), rel=1e-12)

    def test_l4_of_cosine(self):
        g = TorusGrid(1, 64)
        got = sobolev_norm(single_mode(g, (1,)), 0.0, 4.0)
        # quadrature oracle for the integral of cos^4 over one period
        mean_cos4 = quad(lambda x: math.cos(x) ** 4, 0, 2 * math.pi)[0] / (2 * math.pi)
        assert mean_cos4 == pytest.approx(3 / 8, rel=1e-12)
        assert got == pytest.approx((3 / 8) ** 0.25, rel=1e-12)

    def test_sup_norm(self):
        g = TorusGrid(1, 64)
        assert sobolev_norm(single_mode(g, (1,), 2.0), 0.0, math.inf) == pytest.approx(2.0)

    def test_q_below_two_rejected(self):
        with pytest.raises(ValueError):
            sobolev_norm(single_mode(TorusGrid(1, 16), (1,)), 0.0, 1.5)


class TestDealiasAndStream:
    def test_band_limited_unchanged(self):
        g = TorusGrid(2, 32)
        f = single_mode(g, (10, -10))
        assert np.array_equal(dealias(f).coeffs, f.coeffs)

    def test_nyquist_removed(self):
        g = TorusGrid(1, 16)
        c = np.zeros(g.shape, complex)
        c[8] = 1.0
        assert np.max(np.abs(dealias(SpectralField(g, c)).coeffs)) == 0.0

    def test_stream_function_gamma_two(self):
        g = TorusGrid(1, 32)
        psi = stream_function(single_mode(g, (1,)), 2.0)
        assert np.allclose(psi.coeffs, single_mode(g, (1,)).coeffs, atol=1e-15)
        psi2 = stream_function(single_mode(g, (2,)), 2.0)
        assert np.allclose(psi2.coeffs, single_mode(g, (2,)).coeffs / 4, atol=1e-15)

    def test_stream_function_mean_gauge(self):
        g = TorusGrid(2, 16)
        f = SpectralField.from_function(g, lambda x, y: 1.0 + np.cos(x))
        assert stream_function(f, 1.0).coeff((0, 0)) == 0.0
