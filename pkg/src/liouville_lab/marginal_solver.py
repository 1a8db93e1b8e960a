"""Three-point marginal Liouville equation for the Burgers triplet.

The retained variables are ``(u, v, w) = (u_{j-1}, u_j, u_{j+1})`` of a
statistically homogeneous field; one density serves every site. The
effective phase speeds along each axis come from a closure:

``triplet_periodic``
    The ring closes on itself (site j-2 is identified with j+1 and j+2 with
    j-1), so each speed is the single-site Burgers RHS with neighbours drawn
    from the triplet. For a 3-site periodic ring this is exact.

``mean_field``
    The two neighbours outside the triplet are replaced by the mean of a
    supplied 1-point marginal.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .burgers_dynamics import DynamicsSpec, rhs_center
from .errors import ValidationError
from .liouville_solver import (
    Diagnostics,
    FluxOperator,
    PhaseVelocityField,
    assemble_operator,
    evolve,
)
from .phase_space import DensityField, ObservableSpec, PhaseGrid, average, total_mass

CLOSURES = ("triplet_periodic", "mean_field")

Speed = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ClosureSpec:
    kind: str = "triplet_periodic"
    p1: DensityField | None = None

    def __post_init__(self):
        if self.kind not in CLOSURES:
            raise ValidationError(f"unknown closure {self.kind!r}; expected one of {CLOSURES}")
        if self.kind == "mean_field":
            if self.p1 is None or self.p1.grid.axes_count != 1:
                raise ValidationError("mean_field closure needs a 1-axis marginal p1")
            if total_mass(self.p1) <= 0:
                raise ValidationError("mean_field closure: p1 has zero mass (empty distribution)")


@dataclass(frozen=True)
class EffectiveField:
    """Speeds along u, v and w as functions of the cell-center triplet."""

    A_u: Speed
    A_v: Speed
    A_w: Speed

    def __call__(self, u, v, w) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.A_u(u, v, w), self.A_v(u, v, w), self.A_w(u, v, w)

    def as_velocity(self, diffusion: float = 0.0) -> PhaseVelocityField:
        return PhaseVelocityField(lambda mesh: list(self(*mesh)), diffusion)


def effective_field(closure: ClosureSpec, spec: DynamicsSpec) -> EffectiveField:
    if closure.kind == "triplet_periodic":
        return EffectiveField(
            lambda u, v, w: rhs_center(w, u, v, spec),
            lambda u, v, w: rhs_center(u, v, w, spec),
            lambda u, v, w: rhs_center(v, w, u, spec),
        )
    m = average(closure.p1, ObservableSpec("axis_mean", axis=0))
    return EffectiveField(
        lambda u, v, w: rhs_center(np.full_like(u, m), u, v, spec),
        lambda u, v, w: rhs_center(u, v, w, spec),
        lambda u, v, w: rhs_center(v, w, np.full_like(w, m), spec),
    )


def assemble_3pt_operator(phase: PhaseGrid, field: EffectiveField, diffusion: float = 0.0) -> FluxOperator:
    """Per-axis operators are ``op.axes == (U, V, W)``; ``op.L = U + V + W``."""
    if phase.axes_count != 3:
        raise ValidationError(f"the triplet operator needs a 3-axis grid, got {phase.axes_count}")
    return assemble_operator(phase, field.as_velocity(diffusion))


def evolve_3pt(
    p0: DensityField, op: FluxOperator, dt: float, steps: int, method: str = "euler"
) -> tuple[DensityField, Diagnostics]:
    return evolve(p0, op, dt, steps, method)


def cyclic_shift(p: DensityField) -> DensityField:
    """Cyclically relabel the axes: ``out[i, j, k] = p[k, i, j]``."""
    return DensityField(p.grid, np.transpose(p.shaped, (1, 2, 0)))
