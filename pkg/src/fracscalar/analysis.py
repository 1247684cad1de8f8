"""Well-posedness regime oracle, admissible exponents, weak-form residuals
and ensemble moment diagnostics.

Clause identifiers used in certificates:

* ``global_mild``: ``clause (1)`` (d = 1), ``clause (2)`` (d in {2, 3}),
  ``case 1`` and ``case 2`` (extended integrability windows for d in {2, 3}),
  checked in that order; the first passing clause is cited.
* ``local_mild``: ``subcritical`` (any mode, alpha > 1 + d/q).
* ``martingale``: ``general regime`` (free divergence, alpha in (0, 2]).

Strict inequalities are used only where the threshold is open; subscripted
inequality signs in the source statements are read as plain ones. Boundary
comparisons treat values within a relative 1e-12 as equal, so thresholds
such as 1/(alpha - 1) at alpha = 1.2 land exactly on their closed endpoint.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.fft

from .constitutive import ModeCategory, divergence, mode_category, velocity
from .errors import InsufficientDataError
from .integrator import EnsembleReport, SolverConfig, Trajectory
from .spectral import SpectralField, _real_part

INF = math.inf


def alpha0(d: int) -> float:
    """Critical dissipation order 1 + (d - 1)/3 for free-divergence global mild solutions."""
    if int(d) != d or d < 1:
        raise ValueError(f"d must be a positive integer, got {d}")
    return (d + 2) / 3.0


_REL = 1e-12


def _close(a: float, b: float) -> bool:
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= _REL * max(1.0, abs(a), abs(b))


def _le(a: float, b: float) -> bool:
    return a <= b or _close(a, b)


def _lt(a: float, b: float) -> bool:
    return a < b and not _close(a, b)


def _ratio(d: float, q: float) -> float:
    return 0.0 if math.isinf(q) else d / q


def conjugate_index(q: float) -> float:
    """q* = q/(q - 1), with q* = 1 at q = inf."""
    return 1.0 if math.isinf(q) else q / (q - 1.0)


@dataclass(frozen=True)
class RegimeQuery:
    d: int
    alpha: float
    mode: ModeCategory
    q: float = 2.0
    q0: float = INF
    p: float = 2.0
    delta: float = 0.0

    def __post_init__(self):
        if isinstance(self.mode, str):
            object.__setattr__(self, "mode", mode_category(self.mode))
        problems = []
        if int(self.d) != self.d or self.d < 1:
            problems.append(f"d must be a positive integer (got {self.d})")
        if not 0 < self.alpha <= 2:
            problems.append(f"alpha must lie in (0, 2] (got {self.alpha})")
        if not self.q >= 2:
            problems.append(f"q must be >= 2 (got {self.q})")
        if not self.q0 >= 2:
            problems.append(f"q0 must be >= 2 (got {self.q0})")
        if self.q > self.q0:
            problems.append(f"q must not exceed q0 (got q={self.q}, q0={self.q0})")
        if not self.p >= 2:
            problems.append(f"p must be >= 2 (got {self.p})")
        if not self.mode.admits(self.delta):
            rel = ">" if self.mode.strict else ">="
            problems.append(f"mode {self.mode.tag} needs delta {rel} {self.mode.delta_floor} (got {self.delta})")
        if problems:
            raise ValueError("; ".join(problems))


@dataclass(frozen=True)
class Exponents:
    beta_max: float
    delta1_max: float | None
    delta_prime_min: float
    eta_min: float
    delta_dprime_min: float


def admissible_exponents(qr: RegimeQuery) -> Exponents:
    d, a, q = qr.d, qr.alpha, qr.q
    dq = _ratio(d, q)
    dqs = d / conjugate_index(q)
    gap = a - 1.0 - dq
    return Exponents(
        beta_max=a / 2 - d / 2 + dq,
        delta1_max=min(qr.delta, gap) if gap >= 0 else None,
        delta_prime_min=max(a, 1.0 + dqs),
        eta_min=max(1.0 + dq, a / 2 - d / 2 + dqs),
        delta_dprime_min=a + 1.0 + dq - qr.delta,
    )


@dataclass(frozen=True)
class Verdict:
    granted: bool
    clause: str | None = None


@dataclass(frozen=True)
class RegimeCertificate:
    query: RegimeQuery
    global_mild: Verdict
    local_mild: Verdict
    martingale: Verdict
    martingale_extended_q: bool
    exponents: dict = field(default_factory=dict)
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        qr = asdict(self.query)
        qr["mode"] = self.query.mode.tag
        for key in ("q", "q0"):
            if math.isinf(qr[key]):
                qr[key] = "inf"
        return {
            "query": qr,
            "verdicts": {
                name: {"granted": v.granted, "clause": v.clause}
                for name, v in (("global_mild", self.global_mild), ("local_mild", self.local_mild), ("martingale", self.martingale))
            },
            "martingale_extended_q": self.martingale_extended_q,
            "exponents": dict(self.exponents),
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        q = self.query
        lines = [f"regime query: d={q.d} alpha={q.alpha:g} mode={q.mode.tag} q={q.q:g} q0={q.q0:g} p={q.p:g} delta={q.delta:g}"]
        for name, v in (("global_mild", self.global_mild), ("local_mild", self.local_mild), ("martingale", self.martingale)):
            lines.append(f"  {name:<12} {'GRANTED' if v.granted else 'denied':<8} {v.clause or ''}".rstrip())
        if self.martingale.granted:
            lines.append(f"  martingale regularity for q={q.q:g}: {'yes' if self.martingale_extended_q else 'no'}")
        for k, v in self.exponents.items():
            lines.append(f"  {k} = {v:.12g}")
        for note in self.notes:
            lines.append(f"  note: {note}")
        return "\n".join(lines)


def _global_clauses(qr: RegimeQuery):
    """Yield (clause name, passed, reasons-if-failed) for the global mild windows."""
    d, a, q, q0 = qr.d, qr.alpha, qr.q, qr.q0
    if d == 1:
        lo = max(2.0, 1.0 / (a - 1.0))
        ok = _le(lo, q) and _le(q, q0)
        yield "clause (1)", ok, [] if ok else [f"q outside [max{{2, 1/(α−1)}}, q0] = [{lo:g}, {q0:g}]"]
        return
    top = 3.0 * d / (d - 1.0)
    low = d / (a - 1.0)
    ok = _lt(low, q) and _le(q, top) and _le(top, q0)
    yield "clause (2)", ok, [] if ok else [f"clause (2) needs d/(α−1) < q ≤ 3d/(d−1) ≤ q0 ({low:g} < {q:g} ≤ {top:g} ≤ {q0:g})"]
    cap = INF if d <= a else 2.0 * d / (d - a)
    ok = _le(top, q) and _le(q, min(q0, cap)) and _lt(d - 2.0 * d / q, a)
    yield "case 1", ok, [] if ok else ["case 1 needs 3d/(d−1) ≤ q ≤ min{q0, 2d/(d−α)} and d−2d/q < α"]
    ok = _lt(low, q) and _le(q0, top) and _lt(1.0 + d / q, a)
    yield "case 2", ok, [] if ok else ["case 2 needs d/(α−1) < q ≤ q0 ≤ 3d/(d−1) and 1+d/q < α"]


def regime_classify(qr: RegimeQuery) -> RegimeCertificate:
    d, a, q, q0 = qr.d, qr.alpha, qr.q, qr.q0
    free = qr.mode.tag == "C_a"
    notes: list[str] = []
    dq = _ratio(d, q)

    # global mild
    glob = Verdict(False)
    pre = []
    if not free:
        pre.append("global_mild: mode is not free divergence (C_a required)")
    if d not in (1, 2, 3):
        pre.append("global_mild: d ∉ {1,2,3}")
    elif not _lt(alpha0(d), a):
        pre.append(f"global_mild: α ≤ α₀({d}) ({a:g} ≤ {alpha0(d):.6g})")
    if not pre:
        floor = max(2.0, d / (a - 1.0))
        if not _le(floor, q0):
            pre.append(f"global_mild: q0 < max{{2, d/(α−1)}} ({q0:g} < {floor:g})")
    if pre:
        notes.extend(pre)
    else:
        failed = []
        for name, ok, why in _global_clauses(qr):
            if ok:
                glob = Verdict(True, name)
                break
            failed.extend(why)
        if not glob.granted:
            notes.extend(f"global_mild: {w}" for w in failed)

    # local mild
    loc = Verdict(False)
    reasons = []
    if not _lt(1.0 + dq, a):
        reasons.append(f"local_mild: α ≤ 1+d/q ({a:g} ≤ {1.0 + dq:g})")
    else:
        floor = max(2.0, d / (a - 1.0))
        if not (_le(floor, q) and q <= q0):
            reasons.append(f"local_mild: q outside [max{{2, d/(α−1)}}, q0] = [{floor:g}, {q0:g}]")
    if reasons:
        notes.extend(reasons)
    else:
        loc = Verdict(True, "subcritical")

    # martingale
    mart = Verdict(True, "general regime") if free else Verdict(False)
    extended = False
    if not free:
        notes.append("martingale: mode is not free divergence (C_a required)")
    else:
        cap = q0 if d <= a else min(q0, 2.0 * d / (d - a))
        extended = _le(d * (1.0 - 2.0 * _ratio(1, q)), a) and _le(q, cap)

    ex = admissible_exponents(qr)
    exps: dict[str, float] = {}
    if glob.granted or mart.granted:
        exps["beta_max"] = ex.beta_max
        exps["delta_prime_min"] = ex.delta_prime_min
        if ex.beta_max <= 0:
            notes.append(f"beta_max = {ex.beta_max:g} ≤ 0: no positive regularity gain")
    if (glob.granted or loc.granted) and ex.delta1_max is not None:
        exps["delta1_max"] = max(ex.delta1_max, 0.0)
    if loc.granted:
        exps["delta_dprime_min"] = ex.delta_dprime_min
    if mart.granted:
        exps["eta_min"] = ex.eta_min
    return RegimeCertificate(qr, glob, loc, mart, bool(extended), exps, tuple(notes))


def weak_pairing_nonlinear(theta: SpectralField, law, modes: Sequence[Sequence[int]]) -> np.ndarray:
    """<u.grad(theta), phi_k> for phi_k = exp(i k.x), with the derivative moved
    onto the test function: -int theta conj(phi_k) (div u - i k.u) dmu."""
    grid = theta.grid
    u = velocity(theta, law)
    th = _real_part(theta)
    div = _real_part(divergence(u))
    comps = [scipy.fft.fftn(th * _real_part(uj)) / grid.size for uj in u]
    tdiv = scipy.fft.fftn(th * div) / grid.size
    out = np.empty(len(modes), dtype=complex)
    for i, k in enumerate(modes):
        idx = grid.index_of(k)
        out[i] = -(tdiv[idx] - 1j * sum(kj * c[idx] for kj, c in zip(k, comps)))
    return out


def low_modes(d: int, kmax_norm: float = 3.0) -> list[tuple[int, ...]]:
    """All nonzero lattice wavenumbers with Euclidean |k| <= kmax_norm."""
    r = int(math.floor(kmax_norm))
    return [k for k in itertools.product(range(-r, r + 1), repeat=d) if 0 < sum(ki * ki for ki in k) <= kmax_norm**2]


def weak_form_residual(traj: Trajectory, cfg: SolverConfig, modes: Iterable[Sequence[int]]) -> float:
    """Largest |residual| of the weak formulation over test modes and snapshot times.

    For phi = exp(i k.x) the residual at t_N is

        theta_N(k) - theta_0(k) - D_N - sum trapezoid(<B(theta), phi>) - sum <G dW, phi>

    where the dissipative integral D_N = -nu |k|^alpha int theta(s, k) ds is
    integrated with the exponential rule that is exact on the linear flow.
    """
    modes = [tuple(int(v) for v in k) for k in modes]
    if not traj.snapshots or traj.snapshot_steps != list(range(traj.snapshot_steps[0], traj.snapshot_steps[0] + len(traj.snapshots))):
        raise InsufficientDataError("weak_form_residual needs a snapshot at every step")
    if cfg.noise_on and len(traj.increments) < len(traj.snapshots) - 1:
        raise InsufficientDataError("stochastic runs need recorded increments (record_increments=True)")
    grid, dt = cfg.grid, cfg.dt
    for k in modes:
        if any(abs(ki) > grid.n / 3 for ki in k):
            raise ValueError(f"test mode {k} lies outside the dealiased band")
    idx = [grid.index_of(k) for k in modes]
    lam = np.array([cfg.nu * math.sqrt(sum(ki * ki for ki in k)) ** cfg.alpha for k in modes])
    decay = np.expm1(-lam * dt)  # exp(-lam dt) - 1
    vals = np.array([[s.coeffs[i] for i in idx] for s in traj.snapshots])
    if cfg.law is not None:
        nl = np.array([weak_pairing_nonlinear(s, cfg.law, modes) for s in traj.snapshots])
    else:
        nl = np.zeros_like(vals)
    if cfg.noise_on:
        noise = np.array([[g.coeffs[i] for i in idx] for g in traj.increments[: len(vals) - 1]])
    else:
        noise = np.zeros((len(vals) - 1, len(modes)), dtype=complex)
    per_step = decay * vals[:-1] + 0.5 * dt * (nl[:-1] + nl[1:]) + noise
    predicted = vals[0] + np.cumsum(per_step, axis=0)
    return float(np.max(np.abs(vals[1:] - predicted)))


@dataclass(frozen=True)
class MomentReport:
    m: int
    q: float
    beta: float
    e_sup_lq: float
    e_sup_lq_halfwidth: float
    e_int_h_beta: float
    e_int_h_beta_halfwidth: float
    blowup_fraction: float
    degenerate: bool
    resolution_stable: bool | None = None
    resolution_change: float | None = None
    label: str = "consistency check (empirical, not a proof)"


def _mean_halfwidth(x: np.ndarray, z: float = 1.96) -> tuple[float, float]:
    if x.size == 0:
        return math.nan, math.nan
    if x.size == 1:
        return float(x[0]), 0.0
    return float(np.mean(x)), float(z * np.std(x, ddof=1) / math.sqrt(x.size))


def moment_estimate(
    report: EnsembleReport,
    qr: RegimeQuery,
    refined: EnsembleReport | None = None,
    threshold: float = 0.10,
) -> MomentReport:
    """Monte Carlo estimates of E sup|theta|^q_{L^q} and E int |theta|^2_{H^{beta,q}} dt.

    The ensemble must have been recorded at q = qr.q and beta = beta_max of
    ``qr``. With ``refined`` (the same experiment at 2n) the relative change
    of E sup|theta|^q_{L^q} is compared with ``threshold``.
    """
    beta = admissible_exponents(qr).beta_max
    if report.q != qr.q or not math.isclose(report.beta, beta, abs_tol=1e-12):
        raise ValueError(f"ensemble recorded at (q={report.q}, beta={report.beta}); need (q={qr.q}, beta={beta})")
    ok = ~report.blown_up
    degenerate = not np.any(ok)
    sup_mean, sup_hw = _mean_halfwidth(report.sup_lq[ok])
    int_mean, int_hw = _mean_halfwidth(report.int_h_beta[ok])
    stable = change = None
    if refined is not None and not degenerate:
        fine = refined.sup_lq[~refined.blown_up]
        if fine.size:
            change = abs(float(np.mean(fine)) - sup_mean) / abs(sup_mean)
            stable = change <= threshold
        else:
            stable = False
    return MomentReport(
        m=report.m,
        q=report.q,
        beta=report.beta,
        e_sup_lq=sup_mean,
        e_sup_lq_halfwidth=sup_hw,
        e_int_h_beta=int_mean,
        e_int_h_beta_halfwidth=int_hw,
        blowup_fraction=report.blowup_fraction,
        degenerate=degenerate,
        resolution_stable=stable,
        resolution_change=change,
    )
