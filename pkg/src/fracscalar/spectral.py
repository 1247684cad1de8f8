"""Periodic torus discretization and Fourier multiplier algebra.

The torus is [0, 2*pi)^d with normalized measure, so Fourier coefficients are

    f_hat(k) = mean_x f(x) exp(-i k.x)

and Parseval reads |f|_{L2}^2 = sum_k |f_hat(k)|^2. Coefficient arrays use
the FFT ordering of ``numpy.fft.fftfreq`` except that the Nyquist entry is
reported as +n/2.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable, Sequence

import numpy as np
import scipy.fft

HERMITIAN_TOL = 1e-10


def _workers() -> int | None:
    value = os.environ.get("FRACSCALAR_THREADS")
    return int(value) if value else None


@dataclass(frozen=True)
class TorusGrid:
    """Uniform n^d lattice on [0, 2*pi)^d."""

    d: int
    n: int

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError(f"d must be 1, 2 or 3, got {self.d}")
        if self.n < 8 or self.n % 2:
            raise ValueError(f"n must be even and >= 8, got {self.n}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def size(self) -> int:
        return self.n**self.d

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Broadcastable integer wavenumber arrays, Nyquist stored as +n/2."""
        k1 = np.fft.fftfreq(self.n, 1.0 / self.n)
        k1[self.n // 2] = self.n // 2
        return tuple(np.meshgrid(*([k1] * self.d), indexing="ij", sparse=True))

    @cached_property
    def odd_wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Wavenumbers for odd symbols (derivatives): Nyquist set to zero so
        the image of a real field stays real."""
        out = []
        for k in self.wavenumbers:
            k = k.copy()
            k[k == self.n // 2] = 0.0
            out.append(k)
        return tuple(out)

    @cached_property
    def ksq(self) -> np.ndarray:
        """|k|^2 on the full lattice, exact in integer arithmetic."""
        return np.broadcast_to(sum(k**2 for k in self.wavenumbers), self.shape)

    @cached_property
    def kmag(self) -> np.ndarray:
        """Euclidean |k| on the full lattice."""
        return np.sqrt(self.ksq)

    def kpow(self, alpha: float) -> np.ndarray:
        """|k|^alpha, computed from |k|^2 so that alpha = 2 is exact."""
        return self.ksq ** (alpha / 2.0)

    @cached_property
    def kinf(self) -> np.ndarray:
        """max_i |k_i| on the full lattice."""
        return np.broadcast_to(
            np.maximum.reduce([np.abs(k) for k in np.broadcast_arrays(*self.wavenumbers)]),
            self.shape,
        )

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        return self.kinf <= self.n / 3.0

    @cached_property
    def points(self) -> tuple[np.ndarray, ...]:
        x1 = 2.0 * np.pi * np.arange(self.n) / self.n
        return tuple(np.meshgrid(*([x1] * self.d), indexing="ij"))

    def index_of(self, k: Sequence[int]) -> tuple[int, ...]:
        """Array index of lattice wavenumber ``k``."""
        if len(k) != self.d:
            raise ValueError(f"wavenumber {tuple(k)} has wrong dimension for d={self.d}")
        idx = []
        for ki in k:
            ki = int(ki)
            if not -self.n // 2 < ki <= self.n // 2:
                raise ValueError(f"wavenumber component {ki} not resolved on n={self.n}")
            idx.append(ki % self.n)
        return tuple(idx)


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PhysicalField:
    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise ValueError(f"expected shape {self.grid.shape}, got {values.shape}")
        object.__setattr__(self, "values", _freeze(values))


@dataclass(frozen=True, eq=False)
class SpectralField:
    grid: TorusGrid
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=complex)
        if coeffs.shape != self.grid.shape:
            raise ValueError(f"expected shape {self.grid.shape}, got {coeffs.shape}")
        object.__setattr__(self, "coeffs", _freeze(coeffs))

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, c: float) -> "SpectralField":
        return SpectralField(self.grid, c * self.coeffs)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs)

    def coeff(self, k: Sequence[int]) -> complex:
        return complex(self.coeffs[self.grid.index_of(k)])

    @classmethod
    def _wrap(cls, grid: TorusGrid, coeffs: np.ndarray) -> "SpectralField":
        # trusted fast path: caller hands over a fresh complex array of the right shape
        obj = object.__new__(cls)
        object.__setattr__(obj, "grid", grid)
        object.__setattr__(obj, "coeffs", _freeze(coeffs))
        return obj

    @classmethod
    def zeros(cls, grid: TorusGrid) -> "SpectralField":
        return cls(grid, np.zeros(grid.shape, dtype=complex))

    @classmethod
    def from_function(cls, grid: TorusGrid, fn: Callable[..., np.ndarray]) -> "SpectralField":
        """Sample ``fn(x1, ..., xd)`` on the grid and transform."""
        return to_spectral(PhysicalField(grid, fn(*grid.points)))


def _check_same_grid(*fields) -> None:
    grids = {f.grid for f in fields}
    if len(grids) > 1:
        raise ValueError("fields live on different grids")


@dataclass(frozen=True)
class MultiplierOp:
    """Diagonal Fourier operator (Mf)^(k) = m(k) f^(k)."""

    symbol: Callable[[TorusGrid], np.ndarray]
    name: str = ""
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def values(self, grid: TorusGrid) -> np.ndarray:
        if grid not in self._cache:
            self._cache[grid] = _freeze(np.broadcast_to(self.symbol(grid), grid.shape).copy())
        return self._cache[grid]

    def __call__(self, f: SpectralField) -> SpectralField:
        return SpectralField(f.grid, self.values(f.grid) * f.coeffs)


def reflect(coeffs: np.ndarray) -> np.ndarray:
    """Return c(-k) laid out on the same index grid as c(k)."""
    axes = tuple(range(coeffs.ndim))
    return np.roll(np.flip(coeffs, axis=axes), 1, axis=axes)


def hermitian_defect(coeffs: np.ndarray) -> float:
    """Largest |c(k) - conj(c(-k))| relative to max(1, max|c|)."""
    scale = max(1.0, float(np.max(np.abs(coeffs), initial=0.0)))
    return float(np.max(np.abs(coeffs - np.conj(reflect(coeffs))), initial=0.0)) / scale


def to_spectral(f: PhysicalField) -> SpectralField:
    values = f.values
    if not np.all(np.isfinite(values)):
        raise ValueError("physical field contains non-finite values")
    coeffs = scipy.fft.fftn(values, workers=_workers()) / f.grid.size
    return SpectralField(f.grid, coeffs)


def to_physical(f: SpectralField, check: bool = True) -> PhysicalField:
    """Inverse transform of a Hermitian coefficient array.

    The input is symmetrized before the transform; with ``check`` an
    asymmetry above HERMITIAN_TOL raises ``ValueError`` (corrupted state).
    """
    c = f.coeffs
    if check:
        defect = hermitian_defect(c)
        if not defect <= HERMITIAN_TOL:
            raise ValueError(f"coefficients are not Hermitian (defect {defect:.3e})")
    c = 0.5 * (c + np.conj(reflect(c)))
    values = scipy.fft.ifftn(c, workers=_workers()).real * f.grid.size
    return PhysicalField(f.grid, values)


def _real_part(f: SpectralField) -> np.ndarray:
    # fast inverse for fields known to be Hermitian (internal use only)
    return scipy.fft.ifftn(f.coeffs, workers=_workers()).real * f.grid.size


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha <= 2.0:
        raise ValueError(f"alpha must lie in (0, 2], got {alpha}")


def fractional_laplacian(f: SpectralField, alpha: float) -> SpectralField:
    """(-Delta)^(alpha/2): multiply by |k|^alpha; the mean mode maps to 0."""
    _check_alpha(alpha)
    return SpectralField(f.grid, f.grid.kpow(alpha) * f.coeffs)


def laplacian(f: SpectralField) -> SpectralField:
    """Spectral Delta, i.e. multiplication by -sum_i k_i^2."""
    return SpectralField(f.grid, -f.grid.ksq * f.coeffs)


def semigroup_factor(grid: TorusGrid, nu: float, alpha: float, t: float) -> np.ndarray:
    """exp(-nu |k|^alpha t) per mode."""
    if nu <= 0:
        raise ValueError(f"nu must be positive, got {nu}")
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    _check_alpha(alpha)
    return np.exp(-nu * grid.kpow(alpha) * t)


def semigroup_apply(f: SpectralField, nu: float, alpha: float, t: float) -> SpectralField:
    return SpectralField(f.grid, semigroup_factor(f.grid, nu, alpha, t) * f.coeffs)


def bessel_potential(f: SpectralField, s: float) -> SpectralField:
    """(1 - Delta)^(s/2)."""
    return SpectralField(f.grid, (1.0 + f.grid.ksq) ** (s / 2.0) * f.coeffs)


def lq_norm(values: np.ndarray, q: float) -> float:
    """Grid L^q norm under the normalized measure; q = inf gives the max norm."""
    if np.isinf(q):
        return float(np.max(np.abs(values)))
    return float(np.mean(np.abs(values) ** q) ** (1.0 / q))


def sobolev_norm(f: SpectralField, s: float, q: float = 2.0) -> float:
    """|f|_{H^{s,q}}: exact Bessel-potential sum at q = 2, grid quadrature otherwise."""
    if not q >= 2:
        raise ValueError(f"q must be >= 2, got {q}")
    if q == 2:
        w = (1.0 + f.grid.ksq) ** s
        return float(np.sqrt(np.sum(w * np.abs(f.coeffs) ** 2)))
    return lq_norm(to_physical(bessel_potential(f, s)).values, q)


@lru_cache(maxsize=128)
def _homogeneous_weights(grid: TorusGrid, s: float) -> np.ndarray:
    kmag = grid.kmag.ravel()
    w = np.zeros(grid.size)
    nz = kmag > 0
    w[nz] = kmag[nz] ** (2.0 * s)
    return _freeze(w)


def homogeneous_norm(f: SpectralField, s: float) -> float:
    """Seminorm (sum_k |k|^{2s} |f_hat(k)|^2)^{1/2}; the mean mode is excluded."""
    c = f.coeffs.ravel()
    return float(np.sqrt(np.dot(_homogeneous_weights(f.grid, s), c.real**2 + c.imag**2)))


def l2_norm(f: SpectralField) -> float:
    return float(np.sqrt(np.sum(np.abs(f.coeffs) ** 2)))


def inner(f: SpectralField, g: SpectralField) -> float:
    """Real L^2 pairing, sum_k f_hat(k) conj(g_hat(k)) (real for real fields)."""
    _check_same_grid(f, g)
    return float(np.sum(f.coeffs * np.conj(g.coeffs)).real)


def dealias(f: SpectralField) -> SpectralField:
    """Two-thirds rule: drop every mode with some |k_i| > n/3."""
    return SpectralField(f.grid, np.where(f.grid.dealias_mask, f.coeffs, 0.0))


def gradient(f: SpectralField) -> list[SpectralField]:
    return [SpectralField(f.grid, 1j * k * f.coeffs) for k in f.grid.odd_wavenumbers]


def stream_function(theta: SpectralField, gamma: float) -> SpectralField:
    """Solve (-Delta)^(gamma/2) psi = theta in the mean-zero gauge."""
    if not 1.0 <= gamma <= 2.0:
        raise ValueError(f"gamma must lie in [1, 2], got {gamma}")
    kmag = theta.grid.kmag
    inv = np.zeros_like(kmag)
    nz = kmag > 0
    inv[nz] = kmag[nz] ** (-gamma)
    return SpectralField(theta.grid, inv * theta.coeffs)


def single_mode(grid: TorusGrid, k: Sequence[int], amplitude: float = 1.0, kind: str = "cos") -> SpectralField:
    """amplitude * cos(k.x) or amplitude * sin(k.x), built directly in coefficient space."""
    c = np.zeros(grid.shape, dtype=complex)
    ip = grid.index_of(k)
    im = grid.index_of([-int(ki) for ki in k]) if all(abs(int(ki)) < grid.n // 2 for ki in k) else None
    if im is None:
        raise ValueError("single_mode does not support Nyquist wavenumbers")
    if ip == im:
        if kind != "cos":
            return SpectralField(grid, c)
        c[ip] = amplitude
        return SpectralField(grid, c)
    if kind == "cos":
        c[ip] += amplitude / 2
        c[im] += amplitude / 2
    elif kind == "sin":
        c[ip] += amplitude / 2j
        c[im] -= amplitude / 2j
    else:
        raise ValueError(f"kind must be 'cos' or 'sin', got {kind!r}")
    return SpectralField(grid, c)
