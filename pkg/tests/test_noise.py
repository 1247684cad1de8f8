"""Covariance basis, increments, diffusion operators and their norms."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracscalar.noise import (
    CovarianceSpec,
    DiffusionSpec,
    NoiseIncrement,
    RngStream,
    apply_diffusion,
    basis_coefficients,
    growth_constant,
    hs_norm,
    lipschitz_probe,
    real_basis,
    sample_increment,
    synthesize,
    trace,
)
from fracscalar.spectral import PhysicalField, SpectralField, TorusGrid, to_physical


class TestCovariance:
    def test_identity_trace(self):
        assert trace(CovarianceSpec("identity", kmax=1), TorusGrid(1, 16)) == 3.0

    def test_flat_powerlaw_trace(self):
        assert trace(CovarianceSpec("powerlaw", 1.0, 0.0, 1), TorusGrid(1, 16)) == 3.0

    def test_decaying_powerlaw_trace(self):
        assert trace(CovarianceSpec("powerlaw", 1.0, 1.0, 1), TorusGrid(1, 16)) == pytest.approx(2.0, abs=1e-15)

    def test_eigenvalue_cutoff(self):
        cov = CovarianceSpec("powerlaw", 2.0, 1.0, 2)
        assert cov.eigenvalue((1, 1)) == pytest.approx(2.0 / 3.0)
        assert cov.eigenvalue((3, 0)) == 0.0

    def test_kmax_beyond_half_grid(self):
        with pytest.raises(ValueError):
            trace(CovarianceSpec(kmax=9), TorusGrid(1, 16))

    def test_basis_order_independent_of_resolution(self):
        cov = CovarianceSpec("powerlaw", 1.0, 1.0, 3)
        a, _, _, _ = real_basis(cov, TorusGrid(2, 16))
        b, _, _, _ = real_basis(cov, TorusGrid(2, 64))
        assert a == b

    def test_bad_parameters(self):
        with pytest.raises(ValueError):
            CovarianceSpec("powerlaw", -1.0)
        with pytest.raises(ValueError):
            CovarianceSpec("gaussian")


class TestBasis:
    def test_basis_is_orthonormal(self):
        g = TorusGrid(2, 16)
        cov = CovarianceSpec("identity", kmax=2)
        labels, _, _, _ = real_basis(cov, g)
        vals = []
        for j in range(len(labels)):
            amp = np.zeros(len(labels))
            amp[j] = 1.0
            vals.append(to_physical(synthesize(cov, g, amp)).values.ravel())
        V = np.array(vals)
        assert np.allclose(V @ V.T / g.size, np.eye(len(labels)), atol=1e-13)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31))
    def test_coefficients_invert_synthesis(self, seed):
        g = TorusGrid(2, 16)
        cov = CovarianceSpec("powerlaw", 1.0, 0.5, 3)
        labels, _, _, _ = real_basis(cov, g)
        amp = np.random.default_rng(seed).standard_normal(len(labels))
        assert np.allclose(basis_coefficients(synthesize(cov, g, amp), cov), amp, atol=1e-13)


class TestIncrements:
    def test_kmax_zero_gives_constant(self):
        g = TorusGrid(2, 16)
        inc = sample_increment(CovarianceSpec("powerlaw", 1.0, 0.0, 0), g, 0.5, RngStream(1, 1))
        v = to_physical(inc.field).values
        assert np.allclose(v, v.flat[0], atol=1e-15)

    def test_moments(self):
        g = TorusGrid(1, 16)
        cov = CovarianceSpec("powerlaw", 1.0, 1.0, 2)
        dt, m = 0.01, 10_000
        rng = RngStream(5, 1)
        X = np.array([basis_coefficients(sample_increment(cov, g, dt, rng).field, cov) for _ in range(m)])
        _, eig, _, _ = real_basis(cov, g)
        assert np.all(np.abs(X.mean(axis=0)) <= 4 * np.sqrt(eig * dt / m))
        assert np.all(np.abs(X.var(axis=0, ddof=1) / (eig * dt) - 1) <= 0.05)

    def test_same_path_at_every_resolution(self):
        cov = CovarianceSpec("powerlaw", 1.0, 1.0, 3)
        coarse = sample_increment(cov, TorusGrid(2, 16), 0.1, RngStream(9, 4))
        fine = sample_increment(cov, TorusGrid(2, 64), 0.1, RngStream(9, 4))
        assert np.array_equal(basis_coefficients(coarse.field, cov), basis_coefficients(fine.field, cov))

    def test_streams_reproducible_and_distinct(self):
        a = RngStream(3, 1).standard_normal(5)
        assert np.array_equal(a, RngStream(3, 1).standard_normal(5))
        assert not np.array_equal(a, RngStream(3, 2).standard_normal(5))

    def test_rejects_nonpositive_dt(self):
        with pytest.raises(ValueError):
            sample_increment(CovarianceSpec(), TorusGrid(1, 16), 0.0, RngStream(0))


class TestDiffusion:
    def test_additive_passthrough(self):
        g = TorusGrid(1, 16)
        inc = sample_increment(CovarianceSpec(kmax=2), g, 0.1, RngStream(2, 1))
        theta = PhysicalField(g, np.random.default_rng(0).standard_normal(g.shape))
        out = apply_diffusion(theta, DiffusionSpec("additive"), inc)
        assert np.allclose(out.values, to_physical(inc.field).values)

    def test_linear_scaling(self):
        g = TorusGrid(1, 16)
        inc = sample_increment(CovarianceSpec(kmax=2), g, 0.1, RngStream(2, 1))
        out = apply_diffusion(PhysicalField(g, np.full(g.shape, 3.0)), DiffusionSpec("linear", 2.0), inc)
        assert np.allclose(out.values, 6.0 * to_physical(inc.field).values)

    def test_grid_mismatch(self):
        inc = NoiseIncrement(SpectralField.zeros(TorusGrid(1, 32)), 0.1)
        with pytest.raises(ValueError):
            apply_diffusion(PhysicalField(TorusGrid(1, 16), np.zeros(16)), DiffusionSpec(), inc)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            DiffusionSpec("cubic")


class TestNorms:
    def test_additive_hs_norm(self):
        g = TorusGrid(2, 16)
        cov = CovarianceSpec("powerlaw", 1.0, 1.0, 2)
        theta = SpectralField.from_function(g, lambda x, y: np.sin(x) * np.cos(y))
        assert hs_norm(theta, DiffusionSpec("additive"), cov) == pytest.approx(math.sqrt(trace(cov, g)), rel=1e-13)

    def test_linear_hs_norm_on_constant(self):
        g = TorusGrid(1, 16)
        cov = CovarianceSpec("powerlaw", 1.0, 1.0, 1)
        theta = SpectralField.from_function(g, lambda x: np.full_like(x, 2.0))
        assert hs_norm(theta, DiffusionSpec("linear", 1.5), cov) == pytest.approx(3.0 * math.sqrt(2.0), rel=1e-13)

    def test_additive_lipschitz_zero(self):
        g = TorusGrid(1, 16)
        u = SpectralField.from_function(g, np.sin)
        v = SpectralField.from_function(g, np.cos)
        assert lipschitz_probe(DiffusionSpec("additive"), CovarianceSpec(kmax=2), u, v) == 0.0

    def test_lipschitz_needs_distinct_points(self):
        u = SpectralField.from_function(TorusGrid(1, 16), np.sin)
        with pytest.raises(ValueError):
            lipschitz_probe(DiffusionSpec("linear"), CovarianceSpec(), u, u)

    @settings(max_examples=40, deadline=None)
    @given(st.sampled_from(["linear", "saturated"]), st.floats(0.1, 3.0), st.integers(0, 2**31))
    def test_lipschitz_and_growth_bounds(self, kind, c, seed):
        g = TorusGrid(2, 16)
        cov = CovarianceSpec("powerlaw", 1.0, 1.0, 2)
        spec = DiffusionSpec(kind, c)
        rng = np.random.default_rng(seed)
        u, v = (SpectralField.from_function(g, lambda x, y, a=rng.standard_normal(3): a[0] * np.sin(x) + a[1] * np.cos(y) + a[2]) for _ in range(2))
        C = growth_constant(spec, cov, g)
        # pointwise |g(a) - g(b)| <= c |a - b| and sum_e q_e e(x)^2 <= trace(Q)
        assert lipschitz_probe(spec, cov, u, v) <= C * (1 + 1e-12)
        assert hs_norm(u, spec, cov) <= C * (1 + sobolev_norm_l2(u))


def sobolev_norm_l2(f):
    return float(np.sqrt(np.sum(np.abs(f.coeffs) ** 2)))
