"""Conservative finite-volume transport of a phase-space density.

The operator ``L`` is assembled so that ``dp/dt = -L p``; an explicit Euler
step is therefore ``p <- (I - dt L) p``. Advective face fluxes are donor-cell
upwind with the face speed taken as the mean of the two adjacent cell-center
speeds; diffusive fluxes are central. Faces on the box boundary carry no flux,
so every column of ``L`` sums to zero and total mass is conserved.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .burgers_dynamics import DynamicsSpec, SpatialGrid, rhs
from .errors import AssemblyError, IntegrationError, PositivityViolation, ValidationError
from .phase_space import DensityField, PhaseGrid, require_same_grid

# speeds(mesh) -> one array per axis, each broadcastable to the grid shape
SpeedProvider = Callable[[tuple[np.ndarray, ...]], Sequence[np.ndarray]]

POSITIVITY_FLOOR = 1e-12
MAX_AXES = 4


@dataclass(frozen=True)
class PhaseVelocityField:
    speeds: SpeedProvider
    diffusion: float = 0.0

    def __post_init__(self):
        if not self.diffusion >= 0:
            raise ValidationError(f"diffusion must be >= 0, got {self.diffusion}")

    def evaluate(self, phase: PhaseGrid) -> list[np.ndarray]:
        mesh = phase.mesh()
        out = [np.broadcast_to(np.asarray(a, dtype=float), phase.shape) for a in self.speeds(mesh)]
        if len(out) != phase.axes_count:
            raise AssemblyError(f"velocity provider returned {len(out)} components for {phase.axes_count} axes")
        for k, a in enumerate(out):
            bad = ~np.isfinite(a)
            if bad.any():
                cell = tuple(int(i) for i in np.argwhere(bad)[0])
                raise AssemblyError(f"non-finite speed on axis {k} at cell {cell}")
        return out


def zero_field(axes: int) -> PhaseVelocityField:
    return PhaseVelocityField(lambda mesh: [np.zeros_like(mesh[0]) for _ in range(axes)])


def constant_field(speed: Sequence[float], diffusion: float = 0.0) -> PhaseVelocityField:
    speed = [float(s) for s in speed]
    return PhaseVelocityField(lambda mesh: [np.full_like(mesh[0], s) for s in speed], diffusion)


def rotation_field(omega: float = 1.0) -> PhaseVelocityField:
    """Rigid rotation (u, v) -> omega * (-v, u); divergence-free."""
    return PhaseVelocityField(lambda mesh: [-omega * mesh[1], omega * mesh[0]])


def burgers_field(spec: DynamicsSpec, grid: SpatialGrid, diffusion: float = 0.0) -> PhaseVelocityField:
    """Phase velocity of the full N-site Burgers system: one axis per site."""

    def speeds(mesh):
        state = np.stack(mesh, axis=-1)
        f = rhs(state, spec, grid)
        return [f[..., j] for j in range(grid.sites)]

    return PhaseVelocityField(speeds, diffusion)


@dataclass(frozen=True)
class FluxOperator:
    """Sparse ``L`` (CSR, sorted indices) plus its per-axis parts."""

    phase: PhaseGrid
    axes: tuple[sp.csr_matrix, ...] = field(repr=False)
    L: sp.csr_matrix = field(repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.L.shape

    def apply(self, values: np.ndarray) -> np.ndarray:
        return self.L @ values

    def column_sums(self) -> np.ndarray:
        return np.asarray(self.L.sum(axis=0)).ravel()

    def max_row_nonzeros(self) -> int:
        return int(np.diff(self.L.indptr).max()) if self.L.nnz else 0


def _csr(rows, cols, vals, size) -> sp.csr_matrix:
    m = sp.coo_matrix((vals, (rows, cols)), shape=(size, size)).tocsr()
    m.sum_duplicates()
    m.sort_indices()
    return m


def assemble_operator(phase: PhaseGrid, vel: PhaseVelocityField) -> FluxOperator:
    if phase.axes_count > MAX_AXES:
        raise ValidationError(f"at most {MAX_AXES} phase axes supported")
    speeds = vel.evaluate(phase)
    du, D, n = phase.du, vel.diffusion, phase.levels
    index = np.arange(phase.size).reshape(phase.shape)
    parts = []
    for k, a in enumerate(speeds):
        lo = [slice(None)] * phase.axes_count
        hi = [slice(None)] * phase.axes_count
        lo[k] = slice(0, n - 1)
        hi[k] = slice(1, n)
        left = index[tuple(lo)].ravel()
        right = index[tuple(hi)].ravel()
        face = 0.5 * (a[tuple(lo)] + a[tuple(hi)]).ravel()
        # mass crossing the face per unit time: cl * p_left + cr * p_right
        cl = np.maximum(face, 0.0) / du + D / du**2
        cr = np.minimum(face, 0.0) / du - D / du**2
        rows = np.concatenate([left, left, right, right])
        cols = np.concatenate([left, right, left, right])
        vals = np.concatenate([cl, cr, -cl, -cr])
        parts.append(_csr(rows, cols, vals, phase.size))
    L = parts[0].copy()
    for part in parts[1:]:
        L = L + part
    L.sum_duplicates()
    L.sort_indices()
    return FluxOperator(phase, tuple(parts), L.tocsr())


def outflow_rates(phase: PhaseGrid, speeds: Sequence[np.ndarray], diffusion: float = 0.0) -> np.ndarray:
    """Per-cell rate at which mass leaves through its faces (the diagonal of ``L``)."""
    n, du = phase.levels, phase.du
    rate = np.zeros(phase.shape)
    for k, a in enumerate(speeds):
        lo = [slice(None)] * phase.axes_count
        hi = [slice(None)] * phase.axes_count
        lo[k] = slice(0, n - 1)
        hi[k] = slice(1, n)
        face = 0.5 * (a[tuple(lo)] + a[tuple(hi)])
        rate[tuple(lo)] += np.maximum(face, 0.0) / du + diffusion / du**2
        rate[tuple(hi)] += np.maximum(-face, 0.0) / du + diffusion / du**2
    return rate


def max_stable_dt(phase: PhaseGrid, vel: PhaseVelocityField, cfl: float = 0.9) -> float:
    """Explicit step bound ``cfl / rate``.

    ``rate`` is the larger of ``max_cell sum_axes |speed| / du + 2 M D / du**2``
    and the largest per-cell outflow rate through the faces. The second term
    only bites where face speeds diverge; it is what makes ``I - dt L``
    entrywise nonnegative for ``cfl <= 1``. Returns ``inf`` when nothing moves.
    """
    if not 0 < cfl <= 1:
        raise ValidationError(f"cfl must lie in (0, 1], got {cfl}")
    speeds = vel.evaluate(phase)
    total = np.zeros(phase.shape)
    for a in speeds:
        total = total + np.abs(a)
    rate = float(total.max()) / phase.du + 2 * phase.axes_count * vel.diffusion / phase.du**2
    rate = max(rate, float(outflow_rates(phase, speeds, vel.diffusion).max()))
    return math.inf if rate == 0 else cfl / rate


def boundary_mask(phase: PhaseGrid) -> np.ndarray:
    """Flattened mask of cells touching any face of the box."""
    mask = np.zeros(phase.shape, dtype=bool)
    for k in range(phase.axes_count):
        idx = [slice(None)] * phase.axes_count
        idx[k] = 0
        mask[tuple(idx)] = True
        idx[k] = -1
        mask[tuple(idx)] = True
    return mask.ravel()


@dataclass
class Diagnostics:
    dt: float
    mass: list[float] = field(default_factory=list)
    min_value: list[float] = field(default_factory=list)
    boundary_mass: list[float] = field(default_factory=list)

    def record(self, values: np.ndarray, boundary: np.ndarray) -> None:
        self.mass.append(float(np.sum(values)))
        self.min_value.append(float(values.min()))
        self.boundary_mass.append(float(np.sum(values[boundary])))

    @property
    def steps(self) -> int:
        return len(self.mass) - 1

    def max_mass_drift(self) -> float:
        m = np.asarray(self.mass)
        return float(np.max(np.abs(m - m[0])))

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "time", "mass", "min_value", "boundary_mass"])
            for i, (m, lo, b) in enumerate(zip(self.mass, self.min_value, self.boundary_mass)):
                w.writerow([i, f"{i * self.dt:.17g}", f"{m:.17g}", f"{lo:.17g}", f"{b:.17g}"])


def evolve(
    p0: DensityField,
    op: FluxOperator,
    dt: float,
    steps: int,
    method: str = "euler",
    check_positivity: bool = True,
    callback: Callable[[int, np.ndarray], None] | None = None,
) -> tuple[DensityField, Diagnostics]:
    """March ``dp/dt = -L p`` for ``steps`` explicit steps.

    ``euler`` is ``p <- p - dt L p``; ``rk2`` is Heun's method. A cell below
    ``-1e-12`` raises :class:`PositivityViolation` (the step exceeded the CFL
    bound). ``callback(step, values)`` sees every new slice.
    """
    require_same_grid(p0.grid, op.phase)
    if not dt > 0:
        raise ValidationError(f"dt must be positive, got {dt}", code="bad_dt")
    if steps < 0:
        raise ValidationError("steps must be >= 0", code="bad_steps")
    if method not in ("euler", "rk2"):
        raise ValidationError(f"unknown method {method!r}")
    L = op.L
    boundary = boundary_mask(op.phase)
    diag = Diagnostics(dt)
    p = np.array(p0.values)
    diag.record(p, boundary)
    for step in range(1, steps + 1):
        if method == "euler":
            p = p - dt * (L @ p)
        else:
            k1 = L @ p
            k2 = L @ (p - dt * k1)
            p = p - 0.5 * dt * (k1 + k2)
        diag.record(p, boundary)
        if not math.isfinite(diag.mass[-1]):
            raise IntegrationError(f"step {step}: non-finite density")
        if check_positivity and diag.min_value[-1] < -POSITIVITY_FLOOR:
            raise PositivityViolation(
                f"step {step}: min value {diag.min_value[-1]:.3e} below -{POSITIVITY_FLOOR:g}",
                step=step,
                min_value=diag.min_value[-1],
            )
        if callback is not None:
            callback(step, p)
    return DensityField(op.phase, p), diag
