"""Tensor-product phase grids, discrete densities, marginals and averages.

Densities are stored as *cell masses*: every value already includes the
``du**M`` volume factor, so integrals reduce to plain sums. Values are
flattened row-major with axis 0 slowest (numpy C order).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import GridMismatch, ValidationError

MAGIC = b"LIOU"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHHII")  # magic, version, M, n, reserved -> 16 bytes
_BOUNDS = struct.Struct("<dd")


@dataclass(frozen=True)
class PhaseGrid:
    """``axes_count`` axes, each split into ``levels`` equal cells on [u_min, u_max]."""

    axes_count: int
    levels: int
    u_min: float
    u_max: float

    def __post_init__(self):
        if self.axes_count < 1:
            raise ValidationError(f"axes_count must be >= 1, got {self.axes_count}")
        if self.levels < 2:
            raise ValidationError(f"levels must be >= 2, got {self.levels}")
        if not (np.isfinite(self.u_min) and np.isfinite(self.u_max)) or self.u_max <= self.u_min:
            raise ValidationError(
                f"phase extent must be positive, got [{self.u_min}, {self.u_max}]"
            )

    @property
    def du(self) -> float:
        return (self.u_max - self.u_min) / self.levels

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.levels,) * self.axes_count

    @property
    def size(self) -> int:
        return self.levels**self.axes_count

    def centers(self) -> np.ndarray:
        """1-D array of cell centers, shared by every axis."""
        return self.u_min + (np.arange(self.levels) + 0.5) * self.du

    def mesh(self) -> tuple[np.ndarray, ...]:
        """Cell-center coordinates broadcast to the full grid shape (``ij`` indexing)."""
        c = self.centers()
        return tuple(np.meshgrid(*([c] * self.axes_count), indexing="ij"))

    def cell_index(self, values: np.ndarray) -> np.ndarray:
        """Integer cell index per value; out-of-range values map to -1."""
        idx = np.floor((np.asarray(values, dtype=float) - self.u_min) / self.du).astype(np.int64)
        idx[(idx < 0) | (idx >= self.levels)] = -1
        return idx

    def sub_grid(self, axes_count: int) -> "PhaseGrid":
        return PhaseGrid(axes_count, self.levels, self.u_min, self.u_max)


def build_phase_grid(M: int, n: int, u_min: float, u_max: float) -> PhaseGrid:
    return PhaseGrid(int(M), int(n), float(u_min), float(u_max))


@dataclass(frozen=True)
class DensityField:
    """Nonnegative cell masses over a :class:`PhaseGrid`."""

    grid: PhaseGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64).reshape(-1)
        if v.size != self.grid.size:
            raise ValidationError(
                f"expected {self.grid.size} values for grid {self.grid.shape}, got {v.size}"
            )
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def shaped(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)

    def validate(self, floor: float = 0.0) -> "DensityField":
        """Check finiteness and nonnegativity (down to ``-floor``)."""
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("density contains non-finite values")
        lo = self.values.min()
        if lo < -floor:
            raise ValidationError(f"density has negative mass {lo:.3e}")
        return self

    def normalized(self) -> "DensityField":
        z = total_mass(self)
        if z <= 0:
            raise ValidationError("empty distribution")
        return DensityField(self.grid, self.values / z)

    @classmethod
    def zeros(cls, grid: PhaseGrid) -> "DensityField":
        return cls(grid, np.zeros(grid.size))

    @classmethod
    def uniform(cls, grid: PhaseGrid) -> "DensityField":
        return cls(grid, np.full(grid.size, 1.0 / grid.size))

    @classmethod
    def delta(cls, grid: PhaseGrid, cell: Sequence[int], mass: float = 1.0) -> "DensityField":
        v = np.zeros(grid.shape)
        v[tuple(cell)] = mass
        return cls(grid, v)

    @classmethod
    def gaussian(cls, grid: PhaseGrid, mean: Sequence[float], sigma: float | Sequence[float]) -> "DensityField":
        """Product Gaussian integrated exactly over each cell, truncated to the grid and renormalized."""
        from scipy.special import ndtr

        mean = np.broadcast_to(np.asarray(mean, dtype=float), (grid.axes_count,))
        sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (grid.axes_count,))
        if np.any(sigma <= 0):
            raise ValidationError("gaussian sigma must be positive")
        edges = grid.u_min + np.arange(grid.levels + 1) * grid.du
        factors = []
        for m, s in zip(mean, sigma):
            cdf = ndtr((edges - m) / s)
            factors.append(np.diff(cdf))
        out = factors[0]
        for f in factors[1:]:
            out = np.multiply.outer(out, f)
        return cls(grid, out).normalized()


def total_mass(p: DensityField) -> float:
    return float(np.sum(p.values))


def _check_axes(axes: Sequence[int], M: int) -> tuple[int, ...]:
    axes = tuple(int(a) for a in axes)
    if not axes:
        raise ValidationError("keep_axes must be nonempty")
    if any(a < 0 or a >= M for a in axes):
        raise ValidationError(f"keep_axes {axes} out of range for {M} axes")
    if any(b <= a for a, b in zip(axes, axes[1:])):
        raise ValidationError(f"keep_axes {axes} must be strictly increasing")
    return axes


def marginalize(p: DensityField, keep_axes: Sequence[int]) -> DensityField:
    """Sum cell masses over every axis not in ``keep_axes``."""
    keep = _check_axes(keep_axes, p.grid.axes_count)
    drop = tuple(a for a in range(p.grid.axes_count) if a not in keep)
    values = p.shaped.sum(axis=drop) if drop else p.shaped
    return DensityField(p.grid.sub_grid(len(keep)), values)


@dataclass(frozen=True)
class ObservableSpec:
    """What to average: ``axis_mean``, ``axis_moment`` (of ``order``) or ``kinetic_energy``."""

    kind: str
    axis: int = 0
    order: int = 1
    normalize: bool = True

    def __post_init__(self):
        if self.kind not in ("axis_mean", "axis_moment", "kinetic_energy"):
            raise ValidationError(f"unknown observable kind {self.kind!r}")
        if self.kind == "axis_moment" and self.order < 1:
            raise ValidationError("moment order must be >= 1")


def _axis_moment(p: DensityField, axis: int, order: int) -> float:
    # reduce to the 1-point marginal first; the weights are 1-D
    m1 = marginalize(p, [axis]).values
    c = p.grid.centers()
    return float(np.dot(c**order, m1))


def average(p: DensityField, obs: ObservableSpec) -> float:
    M = p.grid.axes_count
    if obs.kind != "kinetic_energy" and not 0 <= obs.axis < M:
        raise ValidationError(f"axis {obs.axis} out of range for {M} axes")
    if obs.kind == "axis_mean":
        raw = _axis_moment(p, obs.axis, 1)
    elif obs.kind == "axis_moment":
        raw = _axis_moment(p, obs.axis, obs.order)
    else:
        c2 = p.grid.centers() ** 2
        shaped = p.shaped
        raw = 0.0
        for ax in range(M):
            w = c2.reshape([-1 if a == ax else 1 for a in range(M)])
            raw += float(np.sum(shaped * w))
    if obs.normalize:
        z = total_mass(p)
        if z <= 0:
            raise ValidationError("empty distribution")
        return raw / z
    return raw


def axis_means(p: DensityField) -> np.ndarray:
    return np.array([average(p, ObservableSpec("axis_mean", axis=a)) for a in range(p.grid.axes_count)])


def kinetic_energy(p: DensityField) -> float:
    return average(p, ObservableSpec("kinetic_energy"))


def require_same_grid(a: PhaseGrid, b: PhaseGrid) -> None:
    if a != b:
        raise GridMismatch(f"grid mismatch: {a} vs {b}")


# -- serialization ---------------------------------------------------------


def to_bytes(p: DensityField) -> bytes:
    g = p.grid
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, g.axes_count, g.levels, 0)
    return header + _BOUNDS.pack(g.u_min, g.u_max) + p.values.astype("<f8").tobytes()


def from_bytes(data: bytes) -> DensityField:
    if len(data) < _HEADER.size + _BOUNDS.size:
        raise ValidationError("truncated density file")
    magic, version, M, n, _ = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise ValidationError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise ValidationError(f"unsupported format version {version}")
    u_min, u_max = _BOUNDS.unpack_from(data, _HEADER.size)
    grid = PhaseGrid(M, n, u_min, u_max)
    body = data[_HEADER.size + _BOUNDS.size:]
    if len(body) != 8 * grid.size:
        raise ValidationError(f"expected {grid.size} values, file holds {len(body) // 8}")
    return DensityField(grid, np.frombuffer(body, dtype="<f8"))


def save_density(p: DensityField, path: str | Path) -> None:
    Path(path).write_bytes(to_bytes(p))


def load_density(path: str | Path) -> DensityField:
    return from_bytes(Path(path).read_bytes())


def to_json(p: DensityField) -> str:
    g = p.grid
    doc = {
        "format": "LIOU",
        "version": FORMAT_VERSION,
        "axes_count": g.axes_count,
        "levels": g.levels,
        "u_min": g.u_min,
        "u_max": g.u_max,
        "values": [float(x) for x in p.values],
    }
    return json.dumps(doc)


def from_json(text: str) -> DensityField:
    doc = json.loads(text)
    grid = PhaseGrid(doc["axes_count"], doc["levels"], doc["u_min"], doc["u_max"])
    return DensityField(grid, np.asarray(doc["values"], dtype=float))
