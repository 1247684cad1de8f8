"""Exponential-Euler time stepping of

    d theta = (-nu A_alpha theta + B(theta)) dt + G(theta) dW,

a Picard solver for the deterministic mild formula, stopping-time ladders
and seeded ensembles.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import trapezoid

from .constitutive import VelocityLaw, nonlinear_term
from .errors import BlowUpError, NonContractionError
from .noise import CovarianceSpec, DiffusionSpec, RngStream, sample_increment
from .spectral import (
    PhysicalField,
    SpectralField,
    TorusGrid,
    _real_part,
    dealias,
    homogeneous_norm,
    lq_norm,
    sobolev_norm,
    to_physical,
    to_spectral,
)

DIAGNOSTIC_COLUMNS = ("step", "t", "l2", "lq", "h_alpha2", "mean_mode", "energy_residual", "noise_energy")


@dataclass(frozen=True)
class StoppingLadder:
    thresholds: tuple[float, ...]
    s: float = 0.0
    q: float = 2.0

    def __post_init__(self):
        th = tuple(float(r) for r in self.thresholds)
        if not th:
            raise ValueError("ladder needs at least one threshold")
        if any(r <= 0 for r in th):
            raise ValueError("ladder thresholds must be positive")
        if any(b <= a for a, b in zip(th, th[1:])):
            raise ValueError(f"ladder thresholds must be strictly increasing, got {th}")
        object.__setattr__(self, "thresholds", th)

    @property
    def norm(self) -> tuple[float, float]:
        return (self.s, self.q)

    def measure(self, theta: SpectralField) -> float:
        return sobolev_norm(theta, self.s, self.q)


@dataclass(frozen=True)
class SolverConfig:
    """Time-stepping parameters.

    ``law=None`` switches the transport term off. ``q`` and ``beta`` select
    the L^q and H^{beta,q} norms recorded in the diagnostics.
    """

    nu: float
    alpha: float
    grid: TorusGrid
    dt: float
    t_end: float
    law: VelocityLaw | None = None
    cov: CovarianceSpec = field(default_factory=CovarianceSpec)
    diff: DiffusionSpec = field(default_factory=DiffusionSpec)
    deterministic: bool = False
    stopping: StoppingLadder | None = None
    q: float = 2.0
    beta: float = 0.0
    output_every: int = 1
    snapshot_every: int = 0
    record_increments: bool = False

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if not 0 < self.alpha <= 2:
            raise ValueError(f"alpha must lie in (0, 2], got {self.alpha}")
        if not (self.dt > 0 and self.t_end > 0):
            raise ValueError("dt and t_end must be positive")
        if self.n_steps > 2**53:
            raise ValueError("t_end/dt is out of range")
        if self.law is not None and self.law.d != self.grid.d:
            raise ValueError("law dimension does not match the grid")
        if self.output_every < 1 or self.snapshot_every < 0:
            raise ValueError("output_every must be >= 1 and snapshot_every >= 0")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    @property
    def noise_on(self) -> bool:
        return not self.deterministic


@dataclass(frozen=True)
class StopRecord:
    step: int
    t: float
    reason: str  # 'blowup' or 'ladder'


@dataclass
class TrajectoryState:
    t: float
    theta: SpectralField
    rng: RngStream | None
    step_index: int = 0
    stopped_at: StopRecord | None = None


@dataclass
class Trajectory:
    """Output of a run: diagnostics table, optional snapshots and increments."""

    diagnostics: np.ndarray  # rows ordered as DIAGNOSTIC_COLUMNS
    final: TrajectoryState
    snapshot_steps: list[int] = field(default_factory=list)
    snapshots: list[SpectralField] = field(default_factory=list)
    increments: list[SpectralField] = field(default_factory=list)
    monitor: np.ndarray | None = None  # (t, value) per step for the ladder norm
    monitor_norm: tuple[float, float] | None = None
    hitting: list[tuple[float, float | None]] | None = None
    iterations: int | None = None
    dt: float | None = None
    h_beta: np.ndarray | None = None  # |theta|_{H^{beta,q}} at each diagnostics row

    @property
    def times(self) -> np.ndarray:
        return self.diagnostics[:, 1]

    def column(self, name: str) -> np.ndarray:
        return self.diagnostics[:, DIAGNOSTIC_COLUMNS.index(name)]

    @property
    def stopped_at(self) -> StopRecord | None:
        return self.final.stopped_at


@lru_cache(maxsize=32)
def _propagators(grid: TorusGrid, nu: float, alpha: float, dt: float):
    z = nu * grid.kpow(alpha) * dt
    E = np.exp(-z)
    phi1 = np.ones_like(z)
    nz = z > 0
    phi1[nz] = -np.expm1(-z[nz]) / z[nz]
    E.setflags(write=False)
    phi1.setflags(write=False)
    return E, phi1


def _advance(theta: SpectralField, cfg: SolverConfig, rng: RngStream | None):
    """One exponential-Euler step; returns (new theta, deterministic part,
    applied noise forcing or None, raw increment G(theta) dW or None)."""
    E, phi1 = _propagators(cfg.grid, cfg.nu, cfg.alpha, cfg.dt)
    c = E * theta.coeffs
    if cfg.law is not None:
        c = c + cfg.dt * phi1 * nonlinear_term(theta, cfg.law).coeffs
    det = c
    raw = forcing = None
    if cfg.noise_on:
        incr = sample_increment(cfg.cov, cfg.grid, cfg.dt, rng)
        if cfg.diff.kind == "additive":
            raw = incr.field.coeffs
        else:
            with np.errstate(over="ignore", invalid="ignore"):
                prod = cfg.diff.g(_real_part(theta)) * _real_part(incr.field)
            if not np.all(np.isfinite(prod)):
                raise BlowUpError("non-finite values in the diffusion term")
            raw = to_spectral(PhysicalField(cfg.grid, prod)).coeffs
        forcing = E * raw
        c = c + forcing
    c = np.where(cfg.grid.dealias_mask, c, 0.0)
    if not np.isfinite(np.vdot(c, c).real):
        raise BlowUpError("non-finite state")
    return SpectralField._wrap(cfg.grid, c), det, forcing, raw


def step(state: TrajectoryState, cfg: SolverConfig) -> TrajectoryState:
    """Advance one step of size cfg.dt. Raises BlowUpError carrying the step index."""
    if state.stopped_at is not None:
        raise ValueError("cannot step a stopped trajectory")
    try:
        theta, _, _, _ = _advance(state.theta, cfg, state.rng)
    except BlowUpError as exc:
        raise BlowUpError(str(exc), step=state.step_index + 1) from None
    n = state.step_index + 1
    return TrajectoryState(n * cfg.dt, theta, state.rng, n)


def _row(n, t, theta, cfg, energy_residual, noise_energy):
    values = _real_part(theta)
    return (
        n,
        t,
        float(np.sqrt(np.sum(np.abs(theta.coeffs) ** 2))),
        lq_norm(values, cfg.q),
        sobolev_norm(theta, cfg.alpha / 2.0, 2.0),
        float(theta.coeffs.flat[0].real),
        energy_residual,
        noise_energy,
    )


def run_trajectory(theta0: SpectralField, cfg: SolverConfig, rng: RngStream | None = None) -> Trajectory:
    """Iterate ``step`` to t_end, recording diagnostics every cfg.output_every steps.

    Blow-up or exceeding the top ladder rung stops the run; the returned
    trajectory then carries ``stopped_at``.
    """
    if theta0.grid != cfg.grid:
        raise ValueError("initial field and config use different grids")
    if not np.all(np.isfinite(theta0.coeffs)):
        raise ValueError("initial field is not finite")
    if cfg.noise_on and rng is None:
        raise ValueError("a stochastic run needs an RngStream")
    state = TrajectoryState(0.0, dealias(theta0), rng)
    return resume(state, cfg)


def resume(state: TrajectoryState, cfg: SolverConfig) -> Trajectory:
    """Continue from ``state`` (e.g. the state at a hitting time) to cfg.t_end."""
    ladder = cfg.stopping
    theta = state.theta
    n0 = state.step_index
    sq = lambda c: float(np.vdot(c, c).real)  # noqa: E731
    energy_res = noise_en = 0.0
    rows = [_row(n0, n0 * cfg.dt, theta, cfg, 0.0, 0.0)]
    hbeta = [sobolev_norm(theta, cfg.beta, cfg.q)]
    snaps, snap_steps, incs = [], [], []
    if cfg.snapshot_every:
        snaps.append(theta)
        snap_steps.append(n0)
    monitor = []
    if ladder is not None:
        monitor.append((n0 * cfg.dt, ladder.measure(theta)))
    stopped = None
    for n in range(n0 + 1, cfg.n_steps + 1):
        try:
            new, det, forcing, raw = _advance(theta, cfg, state.rng)
        except BlowUpError:
            stopped = StopRecord(n, n * cfg.dt, "blowup")
            break
        # deterministic energy budget: 1/2(|det|^2 - |theta|^2) + dt nu |theta|_{H^{alpha/2}}^2
        energy_res += 0.5 * (sq(det) - sq(theta.coeffs)) + cfg.dt * cfg.nu * homogeneous_norm(theta, cfg.alpha / 2) ** 2
        if forcing is not None:
            noise_en += 0.5 * sq(forcing)
        theta = new
        t = n * cfg.dt
        if cfg.record_increments and raw is not None:
            incs.append(SpectralField(cfg.grid, raw))
        if cfg.snapshot_every and n % cfg.snapshot_every == 0:
            snaps.append(theta)
            snap_steps.append(n)
        if ladder is not None:
            value = ladder.measure(theta)
            monitor.append((t, value))
            if value > ladder.thresholds[-1]:
                rows.append(_row(n, t, theta, cfg, energy_res, noise_en))
                hbeta.append(sobolev_norm(theta, cfg.beta, cfg.q))
                stopped = StopRecord(n, t, "ladder")
                state = TrajectoryState(t, theta, state.rng, n)
                break
        if n % cfg.output_every == 0 or n == cfg.n_steps:
            rows.append(_row(n, t, theta, cfg, energy_res, noise_en))
            hbeta.append(sobolev_norm(theta, cfg.beta, cfg.q))
        state = TrajectoryState(t, theta, state.rng, n)
    state.stopped_at = stopped
    traj = Trajectory(
        diagnostics=np.array(rows, dtype=float),
        final=state,
        snapshot_steps=snap_steps,
        snapshots=snaps,
        increments=incs,
        dt=cfg.dt,
        h_beta=np.array(hbeta),
    )
    if ladder is not None:
        traj.monitor = np.array(monitor, dtype=float)
        traj.monitor_norm = ladder.norm
        traj.hitting = hitting_times(traj, ladder)
    return traj


def hitting_times(traj: Trajectory, ladder: StoppingLadder) -> list[tuple[float, float | None]]:
    """First time the monitored norm exceeds each rung (None if never)."""
    if traj.monitor is None or traj.monitor_norm != ladder.norm:
        raise ValueError(f"norm H^{ladder.norm} was not monitored during this run")
    t, v = traj.monitor[:, 0], traj.monitor[:, 1]
    out = []
    for r in ladder.thresholds:
        hit = np.nonzero(v > r)[0]
        out.append((r, float(t[hit[0]]) if hit.size else None))
    return out


def stochastic_convolution_variance(cfg: SolverConfig, k: Sequence[int], t: float) -> float:
    """Per-mode variance of the Ornstein-Uhlenbeck convolution (additive noise)."""
    if cfg.diff.kind != "additive":
        raise NotImplementedError("closed form only available for additive noise")
    qk = cfg.cov.eigenvalue(k)
    lam = cfg.nu * float(np.sqrt(np.sum(np.asarray(k, dtype=float) ** 2))) ** cfg.alpha
    if lam == 0.0:
        return qk * t
    return qk * -np.expm1(-2.0 * lam * t) / (2.0 * lam)


def picard_solve(
    theta0: SpectralField,
    cfg: SolverConfig,
    t_star: float,
    tol: float = 1e-8,
    m_max: int = 50,
    h: float | None = None,
    noise_path: Sequence[SpectralField] | None = None,
) -> Trajectory:
    """Fixed-point iteration of the mild formula on a uniform grid of [0, t_star].

    theta^{m+1}(t_j) = E(t_j) theta0 + int_0^{t_j} E(t_j - s) B(theta^m(s)) ds [+ z(t_j)]

    with trapezoidal quadrature and exact per-mode semigroup weights. An
    optional ``noise_path`` supplies a frozen stochastic convolution z(t_j).
    Raises NonContractionError when m_max iterations do not reach ``tol``
    (measured as sup_j |difference|_{L^q} with q = cfg.q).
    """
    if cfg.noise_on and noise_path is None:
        raise ValueError("picard_solve needs deterministic=True or a frozen noise_path")
    if t_star > cfg.t_end:
        raise ValueError("t_star must not exceed t_end")
    h = cfg.dt if h is None else h
    N = int(round(t_star / h))
    h = t_star / N
    E, _ = _propagators(cfg.grid, cfg.nu, cfg.alpha, h)
    mask = cfg.grid.dealias_mask
    th0 = np.where(mask, theta0.coeffs, 0.0)
    free = np.empty((N + 1,) + cfg.grid.shape, dtype=complex)
    free[0] = th0
    for j in range(1, N + 1):
        free[j] = E * free[j - 1]
    if noise_path is not None:
        if len(noise_path) != N + 1:
            raise ValueError(f"noise_path needs {N + 1} entries")
        free = free + np.stack([z.coeffs for z in noise_path])

    def drift(path):
        if cfg.law is None:
            return np.zeros_like(path)
        return np.stack([nonlinear_term(SpectralField(cfg.grid, c), cfg.law).coeffs for c in path])

    current = free.copy()
    gap = np.inf
    for m in range(1, m_max + 1):
        try:
            B = drift(current)
        except BlowUpError:
            raise NonContractionError("iterate blew up", m, np.inf) from None
        new = np.empty_like(current)
        integral = np.zeros(cfg.grid.shape, dtype=complex)
        new[0] = free[0]
        for j in range(1, N + 1):
            integral = E * (integral + 0.5 * h * B[j - 1]) + 0.5 * h * B[j]
            new[j] = free[j] + integral
        if not np.all(np.isfinite(new)):
            raise NonContractionError("iterate became non-finite", m, np.inf)
        gap = max(lq_norm(to_physical(SpectralField(cfg.grid, a - b), check=False).values, cfg.q) for a, b in zip(new, current))
        current = new
        if gap < tol:
            break
    else:
        raise NonContractionError(f"no contraction after {m_max} iterations (gap {gap:.3e})", m_max, gap)
    fields = [SpectralField(cfg.grid, c) for c in current]
    local = replace(cfg, dt=h, t_end=t_star)
    rows = [_row(j, j * h, f, local, np.nan, 0.0) for j, f in enumerate(fields)]
    return Trajectory(
        diagnostics=np.array(rows, dtype=float),
        final=TrajectoryState(t_star, fields[-1], None, N),
        snapshot_steps=list(range(N + 1)),
        snapshots=fields,
        iterations=m,
        dt=h,
    )


@dataclass
class EnsembleReport:
    """Per-trajectory functionals of an ensemble plus their Monte Carlo means."""

    m: int
    master_seed: int
    q: float
    beta: float
    sup_lq: np.ndarray  # sup_t |theta|_{L^q}^q per trajectory
    int_h_beta: np.ndarray  # int_0^T |theta|_{H^{beta,q}}^2 dt per trajectory
    blown_up: np.ndarray
    stop_times: np.ndarray
    final_states: list[SpectralField] | None = None

    @property
    def blowup_fraction(self) -> float:
        return float(np.mean(self.blown_up))

    @property
    def mean_sup_lq(self) -> float:
        return float(np.mean(self.sup_lq[~self.blown_up])) if not np.all(self.blown_up) else np.nan

    @property
    def mean_int_h_beta(self) -> float:
        return float(np.mean(self.int_h_beta[~self.blown_up])) if not np.all(self.blown_up) else np.nan


def _trajectory_functionals(theta0, cfg: SolverConfig, seed: int, index: int, keep_final: bool):
    rng = RngStream(seed, index)
    if callable(theta0):
        theta0 = theta0(rng)
    traj = run_trajectory(theta0, cfg, rng)
    times = traj.times
    integral = float(trapezoid(traj.h_beta**2, times)) if len(times) > 1 else 0.0
    sup = float(np.max(traj.column("lq") ** cfg.q))
    blown = traj.stopped_at is not None and traj.stopped_at.reason == "blowup"
    stop_t = traj.stopped_at.t if traj.stopped_at is not None else np.nan
    final = traj.final.theta if keep_final else None
    return sup, integral, blown, stop_t, final


def run_ensemble(
    theta0: SpectralField | Callable[[RngStream], SpectralField],
    cfg: SolverConfig,
    m: int,
    master_seed: int,
    workers: int | None = None,
    keep_final: bool = False,
) -> EnsembleReport:
    """Run m trajectories on streams (master_seed, 1..m).

    ``theta0`` may be a callable drawing initial data from the trajectory's
    stream. Results are gathered in stream order, so the report does not
    depend on ``workers``.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    args = [(theta0, cfg, master_seed, i, keep_final) for i in range(1, m + 1)]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_trajectory_functionals, *zip(*args)))
    else:
        results = [_trajectory_functionals(*a) for a in args]
    sup, integral, blown, stop_t, finals = zip(*results)
    return EnsembleReport(
        m=m,
        master_seed=master_seed,
        q=cfg.q,
        beta=cfg.beta,
        sup_lq=np.array(sup),
        int_h_beta=np.array(integral),
        blown_up=np.array(blown, dtype=bool),
        stop_times=np.array(stop_t),
        final_states=list(finals) if keep_final else None,
    )
