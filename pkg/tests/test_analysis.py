"""Regime oracle, exponents, weak-form residuals and moment reports."""
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracscalar.analysis import (
    RegimeQuery,
    admissible_exponents,
    alpha0,
    conjugate_index,
    low_modes,
    moment_estimate,
    regime_classify,
    weak_form_residual,
)
from fracscalar.constitutive import preset
from fracscalar.errors import InsufficientDataError
from fracscalar.integrator import SolverConfig, run_ensemble, run_trajectory
from fracscalar.noise import CovarianceSpec, RngStream
from fracscalar.spectral import SpectralField, TorusGrid, single_mode


class TestAlpha0:
    def test_values(self):
        assert alpha0(1) == 1.0
        assert alpha0(2) == 4 / 3
        assert alpha0(3) == 5 / 3

    def test_invalid(self):
        with pytest.raises(ValueError):
            alpha0(0)

    def test_conjugate(self):
        assert conjugate_index(5) == 1.25
        assert conjugate_index(math.inf) == 1.0


class TestQuery:
    def test_q_above_q0(self):
        with pytest.raises(ValueError):
            RegimeQuery(2, 1.5, "ca", q=6, q0=5)

    def test_alpha_range(self):
        with pytest.raises(ValueError):
            RegimeQuery(2, 2.5, "ca")

    def test_cc_needs_delta_above_half(self):
        with pytest.raises(ValueError):
            RegimeQuery(2, 1.5, "cc", q=8, q0=8, delta=0.5)
        RegimeQuery(2, 1.5, "cc", q=8, q0=8, delta=0.6)


class TestClassify:
    def test_sqg_subcritical(self):
        c = regime_classify(RegimeQuery(2, 1.5, "ca", q=5, q0=math.inf))
        assert c.global_mild.granted and c.global_mild.clause == "clause (2)"
        assert c.local_mild.granted and c.martingale.granted

    def test_one_dimensional_boundary(self):
        c = regime_classify(RegimeQuery(1, 1.2, "ca", q=5, q0=6))
        assert c.global_mild.granted and c.global_mild.clause == "clause (1)"

    def test_weak_dissipation_martingale_only(self):
        c = regime_classify(RegimeQuery(2, 0.5, "ca", q=2, q0=2))
        assert c.martingale.granted
        assert not c.global_mild.granted and not c.local_mild.granted
        text = "\n".join(c.notes)
        assert "α ≤ α₀(2)" in text
        assert "α ≤ 1+d/q" in text

    def test_general_mode_local_only(self):
        c = regime_classify(RegimeQuery(2, 1.5, "cb", q=8, q0=8, delta=0.75))
        assert c.local_mild.granted and c.local_mild.clause == "subcritical"
        assert not c.global_mild.granted and not c.martingale.granted

    def test_serialization(self):
        c = regime_classify(RegimeQuery(2, 1.5, "ca", q=5, q0=math.inf))
        d = json.loads(c.to_json())
        assert d["verdicts"]["global_mild"] == {"granted": True, "clause": "clause (2)"}
        assert d["query"]["q0"] == "inf"
        assert "GRANTED" in c.to_text()

    def test_nonpositive_beta_is_flagged(self):
        qr = RegimeQuery(3, 0.5, "ca", q=8, q0=8)
        c = regime_classify(qr)
        assert c.exponents["beta_max"] == pytest.approx(0.25 - 1.5 + 0.375)
        assert any("beta_max" in n for n in c.notes)

    @settings(max_examples=200, deadline=None)
    @given(
        st.integers(1, 3),
        st.sampled_from(["ca", "cb"]),
        st.floats(2.0, 12.0),
        st.sampled_from([6.0, 8.0, 12.0, math.inf]),
        st.floats(0.05, 2.0),
    )
    def test_granted_verdicts_cite_one_clause(self, d, mode, q, q0, alpha):
        if q > q0:
            q0 = q
        c = regime_classify(RegimeQuery(d, alpha, mode, q=q, q0=q0))
        for v in (c.global_mild, c.local_mild, c.martingale):
            assert (v.clause is not None) == v.granted
        assert c == regime_classify(RegimeQuery(d, alpha, mode, q=q, q0=q0))

    @settings(max_examples=100, deadline=None)
    @given(st.integers(1, 3), st.floats(2.0, 12.0), st.sampled_from([6.0, 8.0, 12.0, math.inf]))
    def test_verdicts_monotone_in_alpha(self, d, q, q0):
        q0 = max(q, q0)
        alphas = np.linspace(0.05, 2.0, 80)
        glob = [regime_classify(RegimeQuery(d, a, "ca", q=q, q0=q0)).global_mild.granted for a in alphas]
        loc = [regime_classify(RegimeQuery(d, a, "ca", q=q, q0=q0)).local_mild.granted for a in alphas]
        for seq in (glob, loc):
            first = seq.index(True) if True in seq else len(seq)
            assert all(seq[first:])


class TestExponents:
    def test_golden_values(self):
        ex = admissible_exponents(RegimeQuery(2, 1.5, "ca", q=5, q0=math.inf, delta=1.0))
        assert ex.beta_max == pytest.approx(0.15, abs=1e-12)
        assert ex.delta1_max == pytest.approx(0.1, abs=1e-12)
        assert ex.delta_prime_min == pytest.approx(2.6, abs=1e-12)
        assert ex.eta_min == pytest.approx(max(1.4, 0.75 - 1 + 1.6), abs=1e-12)
        assert ex.delta_dprime_min == pytest.approx(1.5 + 1 + 0.4 - 1.0, abs=1e-12)

    def test_delta1_absent_below_threshold(self):
        assert admissible_exponents(RegimeQuery(2, 1.2, "ca", q=4, q0=4)).delta1_max is None


class TestWeakResidual:
    def test_linear_flow_is_exact(self):
        g = TorusGrid(2, 16)
        cfg = SolverConfig(nu=0.5, alpha=1.5, grid=g, dt=1e-2, t_end=0.3, deterministic=True, snapshot_every=1)
        th = single_mode(g, (1, 1)) + single_mode(g, (0, 2), 0.4, "sin")
        assert weak_form_residual(run_trajectory(th, cfg), cfg, low_modes(2, 3)) <= 1e-10

    def test_sqg_first_order(self):
        g = TorusGrid(2, 32)
        th = SpectralField.from_function(g, lambda x, y: np.cos(x) + 0.5 * np.sin(2 * y) + 0.3 * np.cos(x + 3 * y))
        res = []
        for dt in (1e-2, 5e-3):
            cfg = SolverConfig(nu=0.1, alpha=1.5, grid=g, dt=dt, t_end=0.3, law=preset("sqg"), deterministic=True, snapshot_every=1)
            res.append(weak_form_residual(run_trajectory(th, cfg), cfg, low_modes(2, 3)))
        assert 1.6 <= res[0] / res[1] <= 2.4

    @pytest.mark.parametrize("seed", [1, 2, 3])
    def test_additive_noise_bounded_by_dt(self, seed):
        g = TorusGrid(1, 32)
        th = single_mode(g, (1,)) + single_mode(g, (3,), 0.3, "sin")
        res = {}
        for dt in (1e-2, 2.5e-3):
            cfg = SolverConfig(
                nu=0.5, alpha=1.5, grid=g, dt=dt, t_end=0.5, cov=CovarianceSpec("powerlaw", 1.0, 1.0, 3),
                snapshot_every=1, record_increments=True,
            )
            res[dt] = weak_form_residual(run_trajectory(th, cfg, RngStream(seed, 1)), cfg, low_modes(1, 3))
        C = res[1e-2] / 1e-2
        assert res[2.5e-3] <= 2.5 * C * 2.5e-3

    def test_missing_snapshots(self):
        g = TorusGrid(1, 16)
        cfg = SolverConfig(nu=1.0, alpha=2.0, grid=g, dt=0.1, t_end=0.5, deterministic=True)
        with pytest.raises(InsufficientDataError):
            weak_form_residual(run_trajectory(single_mode(g, (1,)), cfg), cfg, low_modes(1, 2))

    def test_low_modes(self):
        modes = low_modes(2, 3)
        assert all(math.hypot(*k) <= 3 for k in modes)
        assert (3, 0) in modes and (2, 3) not in modes


class TestMoments:
    def query(self):
        return RegimeQuery(1, 2.0, "cb", q=4, q0=math.inf)

    def cfg(self, **kw):
        beta = admissible_exponents(self.query()).beta_max
        base = dict(nu=1.0, alpha=2.0, grid=TorusGrid(1, 16), dt=0.02, t_end=0.4, q=4.0, beta=beta, cov=CovarianceSpec("powerlaw", 1.0, 1.0, 2))
        base.update(kw)
        return SolverConfig(**base)

    def test_deterministic_has_zero_width(self):
        cfg = self.cfg(deterministic=True)
        rep = moment_estimate(run_ensemble(single_mode(cfg.grid, (1,)), cfg, 5, 0), self.query())
        assert rep.e_sup_lq_halfwidth == 0.0 and rep.e_int_h_beta_halfwidth == 0.0
        assert rep.e_sup_lq == pytest.approx((3 / 8), rel=1e-12)

    def test_two_seeds_agree(self):
        cfg = self.cfg()
        th = SpectralField.zeros(cfg.grid)
        a = moment_estimate(run_ensemble(th, cfg, 200, 1), self.query())
        b = moment_estimate(run_ensemble(th, cfg, 200, 2), self.query())
        assert math.isfinite(a.e_sup_lq)
        se = math.hypot(a.e_sup_lq_halfwidth, b.e_sup_lq_halfwidth) / 1.96
        assert abs(a.e_sup_lq - b.e_sup_lq) <= 3 * se

    def test_wrong_exponent_rejected(self):
        cfg = self.cfg(beta=0.0)
        with pytest.raises(ValueError):
            moment_estimate(run_ensemble(SpectralField.zeros(cfg.grid), cfg, 2, 0), self.query())

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_all_blown_up_is_degenerate(self):
        cfg = self.cfg(law=preset("burgers_1d"), deterministic=True, alpha=2.0)
        th = SpectralField.from_function(cfg.grid, lambda x: 1e200 * np.sin(x))
        rep = moment_estimate(run_ensemble(th, cfg, 3, 0), self.query())
        assert rep.degenerate and rep.blowup_fraction == 1.0
