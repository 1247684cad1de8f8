"""Built-in acceptance checks, shared by ``fracscalar selftest`` and the test suite.

Each check returns a CheckResult; none of them raise on a numerical miss.
"""
from __future__ import annotations

import math
import sys
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .analysis import RegimeQuery, admissible_exponents, alpha0, low_modes, moment_estimate, regime_classify, weak_form_residual
from .constitutive import divergence, nonlinear_term, preset, velocity
from .integrator import SolverConfig, picard_solve, run_ensemble, run_trajectory, stochastic_convolution_variance
from .noise import CovarianceSpec, DiffusionSpec, RngStream, basis_coefficients, real_basis, sample_increment
from .spectral import (
    PhysicalField,
    SpectralField,
    TorusGrid,
    dealias,
    fractional_laplacian,
    inner,
    l2_norm,
    laplacian,
    semigroup_apply,
    single_mode,
    sobolev_norm,
    to_spectral,
)


@dataclass(frozen=True)
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d} {self.name}: {self.detail} ({self.seconds:.1f}s)"


def _random_field(grid: TorusGrid, rng: np.random.Generator, kcut: int | None = None) -> SpectralField:
    """Real, dealiased field with decaying random coefficients."""
    f = to_spectral(PhysicalField(grid, rng.standard_normal(grid.shape)))
    c = f.coeffs * (1.0 + grid.ksq) ** -0.75
    if kcut is not None:
        c = np.where(grid.kinf <= kcut, c, 0.0)
    return dealias(SpectralField(grid, c))


def _smooth_init(x, y):
    return np.cos(x) + 0.5 * np.sin(2 * y) + 0.3 * np.cos(x + 3 * y) + 0.2 * np.sin(2 * x - y)


def check_multipliers() -> tuple[bool, str]:
    worst = 0.0
    exact = True
    for d in (1, 2):
        grid = TorusGrid(d, 64)
        lim = grid.n // 3
        ks = [(k,) for k in range(0, lim + 1)] if d == 1 else [(a, b) for a in range(-lim, lim + 1, 3) for b in range(0, lim + 1, 4)]
        for k in ks:
            for kind in ("cos", "sin"):
                if kind == "sin" and not any(k):
                    continue
                f = single_mode(grid, k, 1.0, kind)
                mag = math.sqrt(sum(ki * ki for ki in k))
                for alpha in (0.5, 1.0, 1.5, 2.0):
                    got = fractional_laplacian(f, alpha).coeffs
                    want = mag**alpha * f.coeffs
                    scale = max(np.max(np.abs(want)), 1e-300)
                    worst = max(worst, float(np.max(np.abs(got - want)) / scale) if mag else float(np.max(np.abs(got))))
                exact &= bool(np.array_equal(fractional_laplacian(f, 2.0).coeffs, -laplacian(f).coeffs))
    return worst <= 1e-12 and exact, f"max rel error {worst:.2e}, alpha=2 equals -Laplacian bitwise: {exact}"


def check_semigroup(samples: int = 1000) -> tuple[bool, str]:
    rng = np.random.default_rng(11)
    grid = TorusGrid(2, 32)
    comp = 0.0
    increases = 0
    norms = [(-1.0, 2.0), (0.0, 2.0), (0.5, 2.0), (1.0, 2.0), (2.0, 2.0), (0.0, 4.0), (1.0, 4.0)]
    for _ in range(samples):
        f = _random_field(grid, rng)
        nu = rng.uniform(0.05, 2.0)
        alpha = rng.uniform(0.1, 2.0)
        t, s = rng.uniform(0.0, 1.0, 2)
        lhs = semigroup_apply(semigroup_apply(f, nu, alpha, t), nu, alpha, s)
        rhs = semigroup_apply(f, nu, alpha, t + s)
        comp = max(comp, l2_norm(lhs - rhs) / l2_norm(f))
        g = semigroup_apply(f, nu, alpha, t)
        for sv, q in norms:
            before, after = sobolev_norm(f, sv, q), sobolev_norm(g, sv, q)
            if after > before * (1 + 1e-12):
                increases += 1
    ok = comp <= 1e-12 and increases == 0
    return ok, f"composition error {comp:.2e}, norm increases {increases} over {samples} fields x {len(norms)} norms"


def check_divergence_free(samples: int = 100) -> tuple[bool, str]:
    rng = np.random.default_rng(12)
    grid = TorusGrid(2, 64)
    laws = [preset("sqg"), preset("modified_qg", 1.5), preset("nse_vorticity_2d")]
    worst = 0.0
    for _ in range(samples):
        f = _random_field(grid, rng)
        for law in laws:
            worst = max(worst, l2_norm(divergence(velocity(f, law))) / l2_norm(f))
    return worst <= 1e-10, f"max |div u|/|theta| = {worst:.2e}"


def check_skew_symmetry(samples: int = 50) -> tuple[bool, str]:
    rng = np.random.default_rng(13)
    grid = TorusGrid(2, 64)
    laws = [preset("sqg"), preset("modified_qg", 1.5), preset("nse_vorticity_2d")]
    worst = 0.0
    for _ in range(samples):
        f = _random_field(grid, rng)
        for law in laws:
            worst = max(worst, abs(inner(nonlinear_term(f, law), f)) / sobolev_norm(f, 1.0) ** 2)
    return worst <= 1e-8, f"max |<B(theta),theta>|/|theta|^2_H1 = {worst:.2e}"


def check_energy_budget() -> tuple[bool, str]:
    grid = TorusGrid(2, 64)
    theta0 = SpectralField.from_function(grid, _smooth_init)
    res = []
    for dt in (1e-3, 5e-4):
        cfg = SolverConfig(nu=0.1, alpha=1.5, grid=grid, dt=dt, t_end=1.0, law=preset("sqg"), deterministic=True, output_every=100)
        res.append(abs(run_trajectory(theta0, cfg).column("energy_residual")[-1]))
    ratio = res[0] / res[1]
    return 1.4 <= ratio <= 2.6, f"residuals {res[0]:.3e}, {res[1]:.3e}; ratio {ratio:.3f} (want [1.4, 2.6])"


def check_linear_decay() -> tuple[bool, str]:
    grid = TorusGrid(1, 16)
    cfg = SolverConfig(nu=1.0, alpha=2.0, grid=grid, dt=1e-3, t_end=1.0, deterministic=True, output_every=100)
    traj = run_trajectory(single_mode(grid, (1,)), cfg)
    err = float(np.max(np.abs(traj.column("l2") - np.exp(-traj.times) / math.sqrt(2))))
    return err <= 1e-3, f"max |L2 - e^-t/sqrt2| = {err:.2e} over t in [0, 1]"


def check_stochastic_convolution(m: int = 10_000) -> tuple[bool, str]:
    grid = TorusGrid(1, 16)
    cov = CovarianceSpec("powerlaw", 1.0, 1.0, 1)
    cfg = SolverConfig(nu=1.0, alpha=2.0, grid=grid, dt=1e-2, t_end=1.0, cov=cov, output_every=10**6)
    rep = run_ensemble(SpectralField.zeros(grid), cfg, m, 2024, keep_final=True)
    coords = np.array([basis_coefficients(f, cov) for f in rep.final_states])
    labels, _, _, _ = real_basis(cov, grid)
    errs = []
    for (k, _kind), v in zip(labels, coords.var(axis=0, ddof=1)):
        want = stochastic_convolution_variance(cfg, k, 1.0)
        errs.append(abs(v / want - 1.0))
    frac = float(np.mean(np.array(errs) <= 0.05))
    return frac >= 0.95, f"{len(errs)} modes, relative errors {', '.join(f'{e:.3f}' for e in errs)}; passing fraction {frac:.2f}"


def check_wiener_covariance(m: int = 10_000) -> tuple[bool, str]:
    grid = TorusGrid(1, 16)
    cov = CovarianceSpec("powerlaw", 1.0, 1.0, 2)
    dt, steps = 0.1, 10
    first, second = [], []
    for i in range(1, m + 1):
        rng = RngStream(31, i)
        incs = [basis_coefficients(sample_increment(cov, grid, dt, rng).field, cov) for _ in range(steps)]
        first.append(np.sum(incs[: steps // 2], axis=0))
        second.append(np.sum(incs[steps // 2 :], axis=0))
    first, second = np.array(first), np.array(second)
    total = first + second
    _, eig, _, _ = real_basis(cov, grid)
    t = dt * steps
    var_err = np.abs(total.var(axis=0, ddof=1) / (t * eig) - 1.0)
    corr = np.array([abs(np.corrcoef(first[:, j], second[:, j])[0, 1]) for j in range(len(eig))])
    bound = 4.0 / math.sqrt(m)
    ok = bool(np.mean(var_err <= 0.05) >= 0.95) and bool(np.all(corr <= bound))
    return ok, f"{len(eig)} modes, max var error {var_err.max():.3f}, max disjoint corr {corr.max():.4f} (bound {bound:.3f})"


def check_temporal_order() -> tuple[bool, str]:
    grid = TorusGrid(1, 64)
    theta0 = SpectralField.from_function(grid, np.sin)
    orders = []
    for alpha in (1.6, 2.0):
        finals = {}
        for dt in (1e-2, 5e-3, 1e-2 / 64):
            cfg = SolverConfig(nu=0.1, alpha=alpha, grid=grid, dt=dt, t_end=0.5, law=preset("burgers_1d"), deterministic=True, output_every=10**6)
            finals[dt] = run_trajectory(theta0, cfg).final.theta
        ref = finals[1e-2 / 64]
        e1, e2 = l2_norm(finals[1e-2] - ref), l2_norm(finals[5e-3] - ref)
        orders.append(math.log2(e1 / e2))
    return min(orders) >= 0.9, "observed orders " + ", ".join(f"alpha={a}: {o:.3f}" for a, o in zip((1.6, 2.0), orders))


def check_picard() -> tuple[bool, str]:
    grid = TorusGrid(1, 64)
    theta0 = SpectralField.from_function(grid, np.sin)
    cfg = SolverConfig(nu=0.1, alpha=1.6, grid=grid, dt=1e-4, t_end=0.1, law=preset("burgers_1d"), deterministic=True, snapshot_every=1)
    stepper = run_trajectory(theta0, cfg)
    pic = picard_solve(theta0, cfg, 0.1, tol=1e-8, m_max=50)
    gap = max(l2_norm(a - b) for a, b in zip(stepper.snapshots, pic.snapshots))
    return gap <= 1e-5, f"sup-t L2 gap {gap:.2e} after {pic.iterations} iterations"


def check_regime_table() -> tuple[bool, str]:
    failures = []

    def expect(cond, what):
        if not cond:
            failures.append(what)

    expect([alpha0(d) for d in (1, 2, 3)] == [1.0, 4.0 / 3.0, 5.0 / 3.0], "alpha0 values")

    c = regime_classify(RegimeQuery(2, 1.5, "ca", q=5, q0=math.inf))
    expect(c.global_mild.granted and c.global_mild.clause == "clause (2)", "d=2 a=1.5 q=5: global via clause (2)")
    expect(c.local_mild.granted and c.martingale.granted, "d=2 a=1.5 q=5: local and martingale")

    c = regime_classify(RegimeQuery(1, 1.2, "ca", q=5, q0=6))
    expect(c.global_mild.granted and c.global_mild.clause == "clause (1)", "d=1 a=1.2 q=5 q0=6: global via clause (1)")

    c = regime_classify(RegimeQuery(2, 0.5, "ca", q=2, q0=2))
    expect(c.martingale.granted and not c.global_mild.granted and not c.local_mild.granted, "d=2 a=0.5: martingale only")
    notes = " | ".join(c.notes)
    expect("α ≤ α₀(2)" in notes and "α ≤ 1+d/q" in notes, "d=2 a=0.5: denial notes")

    c = regime_classify(RegimeQuery(2, 1.5, "cb", q=8, q0=8, delta=0.75))
    expect(c.local_mild.granted and not c.global_mild.granted and not c.martingale.granted, "d=2 a=1.5 C_b q=8: local only")

    ex = admissible_exponents(RegimeQuery(2, 1.5, "ca", q=5, q0=math.inf, delta=1.0))
    for name, got, want in (("beta_max", ex.beta_max, 0.15), ("delta1_max", ex.delta1_max, 0.1), ("delta_prime_min", ex.delta_prime_min, 2.6)):
        expect(abs(got - want) <= 1e-12, f"{name}={got!r} (want {want})")
    return not failures, "all golden rows match" if not failures else "mismatches: " + "; ".join(failures)


def check_weak_residual() -> tuple[bool, str]:
    grid = TorusGrid(2, 32)
    theta0 = SpectralField.from_function(grid, _smooth_init)
    res = []
    for dt in (1e-2, 5e-3):
        cfg = SolverConfig(nu=0.1, alpha=1.5, grid=grid, dt=dt, t_end=0.5, law=preset("sqg"), deterministic=True, snapshot_every=1)
        res.append(weak_form_residual(run_trajectory(theta0, cfg), cfg, low_modes(2, 3)))
    ratio = res[0] / res[1]
    return 1.6 <= ratio <= 2.4, f"residuals {res[0]:.3e}, {res[1]:.3e}; ratio {ratio:.3f} (want [1.6, 2.4])"


DETERMINISM_CONFIG = """
grid: {d: 2, n: 32}
equation: {nu: 0.1, alpha: 1.5, law: sqg}
noise:
  covariance: {kind: powerlaw, a: 0.1, r: 1.0, kmax: 3}
  diffusion: {kind: saturated, c: 1.0}
time: {dt: 0.01, t_end: 0.2}
init: {kind: random, norm: 1.0, per_trajectory: true}
ensemble: {m: 2, master_seed: 99}
output: {diagnostics_stride: 2, snapshot_stride: 5, snapshot_space: spectral}
"""


def check_determinism() -> tuple[bool, str]:
    from .cli import simulate
    from .config import parse_config

    digests = []
    with tempfile.TemporaryDirectory() as tmp:
        for run in ("a", "b"):
            cfg = parse_config(DETERMINISM_CONFIG, tmp)
            manifest = simulate(cfg, Path(tmp) / run)
            digests.append(manifest["artifacts"])
        same_bytes = all(
            (Path(tmp) / "a" / name).read_bytes() == (Path(tmp) / "b" / name).read_bytes() for name in digests[0]
        )
    n_snap = sum(1 for k in digests[0] if k.startswith("snapshots/"))
    ok = digests[0] == digests[1] and same_bytes and n_snap > 0
    return ok, f"{len(digests[0])} artifacts ({n_snap} snapshots), digests identical: {digests[0] == digests[1]}"


def check_resolution_stability(m: int = 100) -> tuple[bool, str]:
    qr = RegimeQuery(2, 1.5, "ca", q=5, q0=math.inf)
    beta = admissible_exponents(qr).beta_max
    reports = {}
    for n in (64, 128):
        grid = TorusGrid(2, n)
        cfg = SolverConfig(
            nu=0.1,
            alpha=1.5,
            grid=grid,
            dt=1e-2,
            t_end=1.0,
            law=preset("sqg"),
            cov=CovarianceSpec("powerlaw", 0.1, 1.0, 4),
            diff=DiffusionSpec("saturated", 1.0),
            q=5.0,
            beta=beta,
            output_every=5,
        )
        reports[n] = run_ensemble(SpectralField.from_function(grid, _smooth_init), cfg, m, 7)
    est = moment_estimate(reports[64], qr, refined=reports[128], threshold=0.10)
    ok = reports[64].blowup_fraction == 0 and reports[128].blowup_fraction == 0 and bool(est.resolution_stable)
    return ok, (
        f"blow-up fractions {reports[64].blowup_fraction:g}/{reports[128].blowup_fraction:g}, "
        f"E sup|theta|^5 = {est.e_sup_lq:.4f} +- {est.e_sup_lq_halfwidth:.4f}, change n=64->128 {est.resolution_change:.2e}"
    )


# (number, name, function, long-running)
CHECKS: list[tuple[int, str, Callable[[], tuple[bool, str]], bool]] = [
    (1, "multiplier exactness", check_multipliers, False),
    (2, "semigroup law and contractivity", check_semigroup, False),
    (3, "divergence-free velocity", check_divergence_free, False),
    (4, "skew-symmetric transport", check_skew_symmetry, False),
    (5, "deterministic energy budget", check_energy_budget, False),
    (6, "linear decay", check_linear_decay, False),
    (7, "stochastic convolution variance", check_stochastic_convolution, True),
    (8, "Wiener covariance", check_wiener_covariance, True),
    (9, "temporal self-convergence", check_temporal_order, False),
    (10, "Picard vs stepper", check_picard, False),
    (11, "regime golden table", check_regime_table, False),
    (12, "weak-form residual", check_weak_residual, False),
    (13, "determinism", check_determinism, False),
    (14, "resolution stability", check_resolution_stability, True),
]


def run_check(number: int) -> CheckResult:
    for num, name, fn, _ in CHECKS:
        if num == number:
            t0 = time.perf_counter()
            try:
                ok, detail = fn()
            except Exception as exc:  # a crash is a failed check, not a crashed selftest
                ok, detail = False, f"{type(exc).__name__}: {exc}"
            return CheckResult(num, name, bool(ok), detail, time.perf_counter() - t0)
    raise KeyError(number)


def run_all(quick: bool = False, stream=None) -> list[CheckResult]:
    stream = stream or sys.stdout
    results = []
    for num, name, _, slow in CHECKS:
        if quick and slow:
            print(f"[SKIP] {num:2d} {name}: skipped with --quick", file=stream, flush=True)
            continue
        r = run_check(num)
        print(r.line(), file=stream, flush=True)
        results.append(r)
    return results
