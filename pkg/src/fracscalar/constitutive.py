"""Velocity laws theta -> u and the transport drift u . grad(theta).

Two symbol families cover every preset:

* ``rot``: u_hat_j(k) = i (S k)_j |k|^{-gamma} theta_hat(k). With S
  antisymmetric the velocity is divergence free (k . S k = 0).
* ``loc``: u_hat_j(k) = sigma_j |k|^{1-gamma} theta_hat(k), a local-type law
  that reduces to u = sigma * theta at gamma = 1 (Burgers).

The drift enters the equation with a plus sign, d theta = (... + u.grad theta) dt.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BlowUpError
from .spectral import (
    PhysicalField,
    SpectralField,
    _check_same_grid,
    _real_part,
    dealias,
    gradient,
    to_spectral,
)

FREE_DIVERGENCE = "C_a"
NON_FREE = ("C_b", "C_c")


@dataclass(frozen=True)
class VelocityLaw:
    family: str
    gamma: float
    S: tuple[tuple[float, ...], ...] | None = None
    sigma: tuple[float, ...] | None = None
    name: str = "custom"
    regularity: str = "C_b"  # tag used only when the law is not divergence free

    def __post_init__(self):
        if self.family not in ("rot", "loc"):
            raise ValueError(f"family must be 'rot' or 'loc', got {self.family!r}")
        if self.gamma < 1:
            raise ValueError(f"gamma must be >= 1, got {self.gamma}")
        if self.regularity not in NON_FREE:
            raise ValueError(f"regularity tag must be one of {NON_FREE}")
        if self.family == "rot":
            if self.S is None:
                raise ValueError("rot law needs a coefficient matrix S")
            S = tuple(tuple(float(v) for v in row) for row in np.atleast_2d(self.S))
            if any(len(row) != len(S) for row in S):
                raise ValueError("S must be square")
            object.__setattr__(self, "S", S)
        else:
            if self.sigma is None:
                raise ValueError("loc law needs a sigma vector")
            object.__setattr__(self, "sigma", tuple(float(v) for v in np.atleast_1d(self.sigma)))

    @property
    def d(self) -> int:
        return len(self.S) if self.family == "rot" else len(self.sigma)

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.S, dtype=float)

    @property
    def divergence_free(self) -> bool:
        return self.family == "rot" and bool(np.all(self.matrix + self.matrix.T == 0))


@dataclass(frozen=True)
class ModeCategory:
    tag: str
    delta_floor: float
    strict: bool = False  # True when delta must exceed delta_floor

    def admits(self, delta: float) -> bool:
        return delta > self.delta_floor if self.strict else delta >= self.delta_floor


_PERP = ((0.0, -1.0), (1.0, 0.0))


def preset(name: str, gamma: float | None = None) -> VelocityLaw:
    """Named constitutive laws.

    ``sqg`` and ``modified_qg`` use u = grad_perp psi with
    (-Delta)^(gamma/2) psi = theta; ``nse_vorticity_2d`` flips S so that
    theta = Delta psi; ``burgers_1d`` is u = theta; ``hilbert_transport_1d``
    has symbol i sign(k).
    """
    if name == "sqg":
        return VelocityLaw("rot", 1.0, S=_PERP, name="sqg")
    if name == "modified_qg":
        if gamma is None or not 1.0 <= gamma <= 2.0:
            raise ValueError(f"modified_qg needs gamma in [1, 2], got {gamma}")
        return VelocityLaw("rot", float(gamma), S=_PERP, name=f"modified_qg({gamma:g})")
    if name == "nse_vorticity_2d":
        return VelocityLaw("rot", 2.0, S=((0.0, 1.0), (-1.0, 0.0)), name="nse_vorticity_2d")
    if name == "burgers_1d":
        return VelocityLaw("loc", 1.0, sigma=(1.0,), name="burgers_1d")
    if name == "hilbert_transport_1d":
        return VelocityLaw("rot", 1.0, S=((1.0,),), name="hilbert_transport_1d")
    raise ValueError(f"unknown velocity law preset {name!r}")


PRESETS = ("sqg", "modified_qg", "nse_vorticity_2d", "burgers_1d", "hilbert_transport_1d")


def velocity_symbols(grid, law: VelocityLaw) -> list[np.ndarray]:
    """Per-component multipliers m_j(k) with u_hat_j = m_j theta_hat."""
    if law.d != grid.d:
        raise ValueError(f"law {law.name!r} is {law.d}-dimensional, grid is {grid.d}-dimensional")
    kmag = grid.kmag
    nz = kmag > 0
    if law.family == "rot":
        ks = grid.odd_wavenumbers
        scale = np.zeros(grid.shape)
        scale[nz] = kmag[nz] ** (-law.gamma)
        out = []
        for row in law.S:
            sk = sum(s * k for s, k in zip(row, ks))
            out.append(1j * np.broadcast_to(sk, grid.shape) * scale)
        return out
    scale = np.zeros(grid.shape)
    scale[nz] = kmag[nz] ** (1.0 - law.gamma)
    if law.gamma == 1.0:
        scale[~nz] = 1.0
    return [sig * scale for sig in law.sigma]


def velocity(theta: SpectralField, law: VelocityLaw) -> list[SpectralField]:
    return [SpectralField(theta.grid, m * theta.coeffs) for m in velocity_symbols(theta.grid, law)]


def divergence(u: list[SpectralField]) -> SpectralField:
    _check_same_grid(*u)
    grid = u[0].grid
    if len(u) != grid.d:
        raise ValueError(f"expected {grid.d} components, got {len(u)}")
    total = sum(1j * k * uj.coeffs for k, uj in zip(grid.odd_wavenumbers, u))
    return SpectralField(grid, total)


def nonlinear_term(theta: SpectralField, law: VelocityLaw) -> SpectralField:
    """Pseudo-spectral u . grad(theta), dealiased before and after the product."""
    th = dealias(theta)
    u = velocity(th, law)
    grad = gradient(th)
    with np.errstate(over="ignore", invalid="ignore"):
        prod = sum(_real_part(uj) * _real_part(gj) for uj, gj in zip(u, grad))
    if not np.all(np.isfinite(prod)):
        raise BlowUpError("non-finite values in the transport product")
    return dealias(to_spectral(PhysicalField(theta.grid, prod)))


def classify_mode(law: VelocityLaw) -> ModeCategory:
    if law.divergence_free:
        return ModeCategory(FREE_DIVERGENCE, 0.0)
    if law.regularity == "C_c":
        return ModeCategory("C_c", 0.5, strict=True)
    return ModeCategory("C_b", 0.0)


def mode_category(tag: str) -> ModeCategory:
    """ModeCategory from its tag ('C_a', 'C_b', 'C_c'; case and underscore optional)."""
    key = tag.replace("_", "").lower()
    table = {
        "ca": ModeCategory("C_a", 0.0),
        "cb": ModeCategory("C_b", 0.0),
        "cc": ModeCategory("C_c", 0.5, strict=True),
    }
    if key not in table:
        raise ValueError(f"unknown mode category {tag!r}")
    return table[key]
