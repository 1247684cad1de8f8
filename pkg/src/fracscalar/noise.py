"""Q-Wiener increments, Nemytskii diffusion operators and their
Hilbert-Schmidt norms.

Q is diagonal on the real trigonometric basis {1, sqrt(2) cos k.x,
sqrt(2) sin k.x}; only modes with |k|_inf <= kmax are driven. Standard
normals are drawn in a canonical mode order that does not depend on the grid
resolution, so one seed yields the same Brownian path at every n.
"""
from __future__ import annotations

import copy
import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import BlowUpError
from .spectral import PhysicalField, SpectralField, TorusGrid, _real_part, to_physical, lq_norm


@dataclass(frozen=True)
class CovarianceSpec:
    """Diagonal covariance: q_k = a (1 + |k|^2)^(-r) ('powerlaw') or 1 ('identity')."""

    kind: str = "powerlaw"
    a: float = 1.0
    r: float = 0.0
    kmax: int = 1

    def __post_init__(self):
        if self.kind not in ("powerlaw", "identity"):
            raise ValueError(f"covariance kind must be 'powerlaw' or 'identity', got {self.kind!r}")
        if self.kind == "powerlaw" and not (self.a > 0 and self.r >= 0):
            raise ValueError("powerlaw covariance needs a > 0 and r >= 0")
        if int(self.kmax) != self.kmax or self.kmax < 0:
            raise ValueError(f"kmax must be a non-negative integer, got {self.kmax}")

    def eigenvalue(self, k) -> float:
        k = np.asarray(k, dtype=float)
        if np.max(np.abs(k), initial=0.0) > self.kmax:
            return 0.0
        if self.kind == "identity":
            return 1.0
        return self.a * (1.0 + float(np.sum(k**2))) ** (-self.r)

    def is_trace_class(self, d: int) -> bool:
        # every spec is truncated at kmax, so the truncated operator is trace class
        return True


@dataclass(frozen=True)
class DiffusionSpec:
    """Pointwise diffusion G(theta)h = g(theta) h."""

    kind: str = "additive"
    c: float = 1.0

    def __post_init__(self):
        if self.kind not in ("additive", "linear", "saturated"):
            raise ValueError(f"diffusion kind must be additive, linear or saturated, got {self.kind!r}")

    def g(self, v: np.ndarray) -> np.ndarray:
        if self.kind == "additive":
            return np.ones_like(v)
        if self.kind == "linear":
            return self.c * v
        return self.c * v / np.sqrt(1.0 + v * v)


@dataclass(frozen=True, eq=False)
class NoiseIncrement:
    field: SpectralField
    dt: float


class RngStream:
    """Counter-based stream keyed by (master seed, stream id)."""

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def standard_normal(self, size) -> np.ndarray:
        return self.generator.standard_normal(size)

    @property
    def state(self) -> dict:
        return self.generator.bit_generator.state

    def copy(self) -> "RngStream":
        return copy.deepcopy(self)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


def _check_kmax(cov: CovarianceSpec, grid: TorusGrid) -> None:
    if cov.kmax > grid.n // 2:
        raise ValueError(f"kmax={cov.kmax} exceeds n/2={grid.n // 2}")


@lru_cache(maxsize=64)
def real_basis(cov: CovarianceSpec, grid: TorusGrid):
    """Driven basis elements in canonical order.

    Returns (labels, eigenvalues, plus_index, minus_index). Each label is
    (k, 'const'|'cos'|'sin'). Wavevectors touching the Nyquist frequency are
    not driven: their sine vanishes on the grid.
    """
    _check_kmax(cov, grid)
    labels, eig, ip, im = [], [], [], []
    half = grid.n // 2
    for k in itertools.product(range(-cov.kmax, cov.kmax + 1), repeat=grid.d):
        if any(abs(ki) >= half for ki in k):
            continue
        nonzero = [ki for ki in k if ki != 0]
        if nonzero and nonzero[0] < 0:
            continue  # represented by -k
        q = cov.eigenvalue(k)
        kinds = ("const",) if not nonzero else ("cos", "sin")
        for kind in kinds:
            labels.append((k, kind))
            eig.append(q)
            ip.append(grid.index_of(k))
            im.append(grid.index_of(tuple(-ki for ki in k)))
    ip = tuple(np.array(a) for a in zip(*ip)) if ip else ()
    im = tuple(np.array(a) for a in zip(*im)) if im else ()
    return tuple(labels), np.array(eig), ip, im


def trace(cov: CovarianceSpec, grid: TorusGrid) -> float:
    _, eig, _, _ = real_basis(cov, grid)
    return float(np.sum(eig))


@lru_cache(maxsize=64)
def _synthesis_plan(cov: CovarianceSpec, grid: TorusGrid):
    labels, _, ip, im = real_basis(cov, grid)
    kinds = np.array([kind for _, kind in labels])
    # sqrt2 cos = (e^{ikx} + e^{-ikx}) / sqrt2; sqrt2 sin = (e^{ikx} - e^{-ikx}) / (i sqrt2)
    plus = np.where(kinds == "const", 1.0 + 0j, np.where(kinds == "cos", 1 / np.sqrt(2), -1j / np.sqrt(2)))
    minus = np.where(kinds == "cos", 1 / np.sqrt(2), 1j / np.sqrt(2))
    pair = kinds != "const"
    shape = grid.shape
    flat_p = np.ravel_multi_index(ip, shape) if labels else np.zeros(0, dtype=int)
    flat_m = np.ravel_multi_index(im, shape)[pair] if labels else np.zeros(0, dtype=int)
    idx = np.concatenate([flat_p, flat_m])
    weights = np.concatenate([plus, minus[pair]])
    source = np.concatenate([np.arange(len(labels)), np.nonzero(pair)[0]])
    return idx, weights, source


def synthesize(cov: CovarianceSpec, grid: TorusGrid, amplitudes: np.ndarray) -> SpectralField:
    """Spectral field sum_e amplitudes[e] * e(x) over the driven real basis."""
    idx, weights, source = _synthesis_plan(cov, grid)
    w = weights * amplitudes[source]
    re = np.bincount(idx, weights=w.real, minlength=grid.size)
    im = np.bincount(idx, weights=w.imag, minlength=grid.size)
    return SpectralField._wrap(grid, (re + 1j * im).reshape(grid.shape))


def basis_coefficients(f: SpectralField, cov: CovarianceSpec) -> np.ndarray:
    """Coordinates of ``f`` on the driven real basis, in canonical order."""
    labels, _, ip, _ = real_basis(cov, f.grid)
    if not labels:
        return np.zeros(0)
    c = f.coeffs[ip]
    kinds = np.array([kind for _, kind in labels])
    return np.where(kinds == "const", c.real, np.where(kinds == "cos", np.sqrt(2) * c.real, -np.sqrt(2) * c.imag))


def sample_increment(cov: CovarianceSpec, grid: TorusGrid, dt: float, rng: RngStream) -> NoiseIncrement:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    _, eig, _, _ = real_basis(cov, grid)
    xi = rng.standard_normal(len(eig))
    return NoiseIncrement(synthesize(cov, grid, np.sqrt(eig * dt) * xi), dt)


def apply_diffusion(theta: PhysicalField, spec: DiffusionSpec, incr: NoiseIncrement) -> PhysicalField:
    if theta.grid != incr.field.grid:
        raise ValueError("theta and increment live on different grids")
    out = spec.g(theta.values) * to_physical(incr.field).values
    if not np.all(np.isfinite(out)):
        raise BlowUpError("non-finite values in the diffusion term")
    return PhysicalField(theta.grid, out)


def _basis_weight(cov: CovarianceSpec, grid: TorusGrid) -> np.ndarray:
    """sum_e q_e e(x)^2 on the grid."""
    labels, eig, _, _ = real_basis(cov, grid)
    x = grid.points
    w = np.zeros(grid.shape)
    for (k, kind), q in zip(labels, eig):
        if kind == "const":
            w += q
            continue
        phase = sum(ki * xi for ki, xi in zip(k, x))
        trig = np.cos(phase) if kind == "cos" else np.sin(phase)
        w += q * 2.0 * trig**2
    return w


def _hs_of_multiplier(values: np.ndarray, cov: CovarianceSpec, grid: TorusGrid) -> float:
    # sum_e q_e |m e|_{L2}^2 = mean_x m(x)^2 sum_e q_e e(x)^2
    return float(np.sqrt(np.mean(values**2 * _basis_weight(cov, grid))))


def hs_norm(theta: SpectralField, spec: DiffusionSpec, cov: CovarianceSpec) -> float:
    """Hilbert-Schmidt norm of G(theta) Q^(1/2) on L^2."""
    g = spec.g(_real_part(theta))
    return _hs_of_multiplier(g, cov, theta.grid)


def lipschitz_probe(spec: DiffusionSpec, cov: CovarianceSpec, u: SpectralField, v: SpectralField) -> float:
    """|(G(u) - G(v)) Q^(1/2)|_HS / |u - v|_{L2}."""
    uv, vv = _real_part(u), _real_part(v)
    denom = lq_norm(uv - vv, 2.0)
    if denom == 0.0:
        raise ValueError("lipschitz_probe needs u != v")
    return _hs_of_multiplier(spec.g(uv) - spec.g(vv), cov, u.grid) / denom


def growth_constant(spec: DiffusionSpec, cov: CovarianceSpec, grid: TorusGrid) -> float:
    """C with hs_norm(theta) <= C (1 + |theta|_{L2}) for every theta."""
    root = np.sqrt(trace(cov, grid))
    return float(root if spec.kind == "additive" else abs(spec.c) * root)
