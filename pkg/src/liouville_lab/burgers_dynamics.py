"""Semi-discrete Burgers right-hand sides on a unit-spaced 1-D grid.

Two schemes are provided:

``paper_matrix``
    f_j = B_{j,j-1} u_{j-1} + B_{j,j} u_j + B_{j,j+1} u_{j+1} with the
    state-dependent "Burgers matrix" rows (nu - u_j/4, -2 nu - u_j/4, nu + u_j/4),
    taken verbatim. It does not annihilate constant states: a uniform state c
    gives -c**2/4 at every site.

``consistent_central``
    f_j = -u_j (u_{j+1} - u_{j-1}) / 2 + nu (u_{j+1} - 2 u_j + u_{j-1}), the
    second-order central discretization of u_t + u u_x = nu u_xx.

Both act on arrays whose *last* axis runs over sites, so a whole ensemble
(or a phase-space mesh) can be evaluated in one call.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import IntegrationError, ValidationError

SCHEMES = ("paper_matrix", "consistent_central")


@dataclass(frozen=True)
class SpatialGrid:
    sites: int
    periodic: bool = True
    dx: float = 1.0

    def __post_init__(self):
        if self.sites < 2:
            raise ValidationError(f"need at least 2 sites, got {self.sites}")
        if self.dx <= 0:
            raise ValidationError("dx must be positive")


@dataclass(frozen=True)
class DynamicsSpec:
    scheme: str = "consistent_central"
    nu: float = 0.0
    # reserved for parameter perturbation; deterministic schemes ignore it
    noise_params: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValidationError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if not self.nu >= 0:
            raise ValidationError(f"nu must be >= 0, got {self.nu}")


@dataclass(frozen=True)
class BurgersCoeffs:
    b_minus: float
    b_zero: float
    b_plus: float


def burgers_matrix_row(u_center: float, nu: float) -> BurgersCoeffs:
    if nu < 0:
        raise ValidationError(f"nu must be >= 0, got {nu}")
    q = u_center / 4
    return BurgersCoeffs(nu - q, -2 * nu - q, nu + q)


def rhs_center(left, center, right, spec: DynamicsSpec, dx: float = 1.0):
    """Single-site right-hand side given the site value and its two neighbours.

    Works elementwise on arrays. ``dx`` rescales the differences (the grid
    default is unity); only ``consistent_central`` has a meaningful dx
    dependence.
    """
    nu = spec.nu
    if spec.scheme == "consistent_central":
        return -center * (right - left) / (2 * dx) + nu * (right - 2 * center + left) / (dx * dx)
    q = center / 4
    return (nu - q) * left + (-2 * nu - q) * center + (nu + q) * right


def neighbours(state: np.ndarray, periodic: bool) -> tuple[np.ndarray, np.ndarray]:
    """Left and right neighbour arrays along the last axis.

    Non-periodic ends copy the edge value (zero-gradient ghost).
    """
    if periodic:
        return np.roll(state, 1, axis=-1), np.roll(state, -1, axis=-1)
    left = np.concatenate([state[..., :1], state[..., :-1]], axis=-1)
    right = np.concatenate([state[..., 1:], state[..., -1:]], axis=-1)
    return left, right


def rhs(state, spec: DynamicsSpec, grid: SpatialGrid) -> np.ndarray:
    state = np.asarray(state, dtype=float)
    if state.shape[-1] != grid.sites:
        raise ValidationError(f"state has {state.shape[-1]} sites, grid has {grid.sites}")
    left, right = neighbours(state, grid.periodic)
    return rhs_center(left, state, right, spec, grid.dx)


def _check_finite(state: np.ndarray) -> None:
    bad = ~np.isfinite(state)
    if bad.any():
        where = np.argwhere(bad)[0]
        site = int(where[-1])
        realization = int(where[0]) if state.ndim > 1 else None
        raise IntegrationError(
            f"non-finite value at site {site}"
            + (f" in realization {realization}" if realization is not None else ""),
            site=site,
            realization=realization,
        )


def step_rk4(state, spec: DynamicsSpec, grid: SpatialGrid, dt: float) -> np.ndarray:
    """One classical RK4 step; rows of a 2-D ``state`` are advanced independently."""
    if not dt > 0:
        raise ValidationError(f"dt must be positive, got {dt}", code="bad_dt")
    u = np.asarray(state, dtype=float)
    # overflow is reported below as an integration failure
    with np.errstate(over="ignore", invalid="ignore"):
        k1 = rhs(u, spec, grid)
        k2 = rhs(u + 0.5 * dt * k1, spec, grid)
        k3 = rhs(u + 0.5 * dt * k2, spec, grid)
        k4 = rhs(u + dt * k3, spec, grid)
        out = u + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    _check_finite(out)
    return out


def integrate(state, spec: DynamicsSpec, grid: SpatialGrid, dt: float, steps: int) -> np.ndarray:
    u = np.asarray(state, dtype=float)
    for _ in range(steps):
        u = step_rk4(u, spec, grid, dt)
    return u


def sine_profile(sites: int, amplitude: float = 1.0, dx: float = 1.0) -> np.ndarray:
    x = np.arange(sites) * dx
    return amplitude * np.sin(2 * np.pi * x / (sites * dx))


def as_profile(values: Sequence[float], grid: SpatialGrid) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.shape != (grid.sites,):
        raise ValidationError(f"profile must have {grid.sites} entries, got shape {arr.shape}")
    return arr
