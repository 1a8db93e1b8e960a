"""Monte-Carlo ensemble of Burgers trajectories and their empirical PDFs.

Every realization draws from its own Philox stream keyed by ``(seed, r)``,
so the sampled initial conditions, and hence every trajectory, do not depend
on how realizations are split across workers.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .burgers_dynamics import DynamicsSpec, SpatialGrid, as_profile, step_rk4
from .errors import IntegrationError, ValidationError
from .phase_space import DensityField, PhaseGrid

log = logging.getLogger(__name__)

# smallest perturbation width treated as a genuine spread
_DEGENERATE = 1e-150


@dataclass(frozen=True)
class InitialEnsembleSpec:
    base_profile: np.ndarray
    kind: str = "gaussian"  # or "uniform"
    width: float = 0.1  # sigma for gaussian, half-width for uniform
    count: int = 1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "base_profile", np.asarray(self.base_profile, dtype=float))
        if self.kind not in ("gaussian", "uniform"):
            raise ValidationError(f"unknown perturbation {self.kind!r}")
        if not (self.width > _DEGENERATE and math.isfinite(self.width)):
            raise ValidationError(
                f"degenerate perturbation: {self.kind} width {self.width!r}", code="degenerate_perturbation"
            )
        if self.count < 1:
            raise ValidationError("count must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")


def substream(seed: int, realization: int) -> np.random.Generator:
    """Counter-based generator for one realization."""
    return np.random.Generator(np.random.Philox(key=[seed, realization]))


def sample_initial_conditions(spec: InitialEnsembleSpec, grid: SpatialGrid) -> np.ndarray:
    base = as_profile(spec.base_profile, grid)
    out = np.empty((spec.count, grid.sites))
    for r in range(spec.count):
        rng = substream(spec.seed, r)
        if spec.kind == "gaussian":
            out[r] = base + rng.normal(0.0, spec.width, grid.sites)
        else:
            out[r] = base + rng.uniform(-spec.width, spec.width, grid.sites)
    return out


@dataclass(frozen=True)
class TrajectoryBundle:
    """``states[r, m, j]``: realization r, time slice m, site j."""

    states: np.ndarray = field(repr=False)
    dt: float
    spec: DynamicsSpec
    seed: int | None = None

    @property
    def realizations(self) -> int:
        return self.states.shape[0]

    @property
    def slices(self) -> int:
        return self.states.shape[1]

    @property
    def T(self) -> float:
        return self.dt * (self.slices - 1)


def _chunks(count: int, workers: int) -> list[tuple[int, int]]:
    size = max(1, -(-count // max(1, workers)))
    return [(a, min(a + size, count)) for a in range(0, count, size)]


def _integrate_block(init: np.ndarray, offset: int, spec, grid, dt, steps) -> np.ndarray:
    out = np.empty((init.shape[0], steps + 1, init.shape[1]))
    out[:, 0] = init
    u = init
    for m in range(steps):
        try:
            u = step_rk4(u, spec, grid, dt)
        except IntegrationError as exc:
            r = offset + (exc.realization or 0)
            raise IntegrationError(
                f"realization {r}: non-finite value at site {exc.site} (step {m + 1})",
                site=exc.site,
                realization=r,
            ) from None
        out[:, m + 1] = u
    return out


def run_ensemble(
    init: np.ndarray,
    spec: DynamicsSpec,
    grid: SpatialGrid,
    dt: float,
    steps: int,
    workers: int = 1,
    seed: int | None = None,
) -> TrajectoryBundle:
    """Integrate each row of ``init`` with RK4 for ``steps`` steps.

    Rows are independent, so splitting them over ``workers`` threads changes
    nothing in the result.
    """
    if not dt > 0:
        raise ValidationError(f"dt must be positive, got {dt}", code="bad_dt")
    if steps < 1:
        raise ValidationError("steps must be >= 1", code="bad_steps")
    init = np.atleast_2d(np.asarray(init, dtype=float))
    if init.shape[1] != grid.sites:
        raise ValidationError(f"initial states have {init.shape[1]} sites, grid has {grid.sites}")
    blocks = _chunks(init.shape[0], workers)
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(
                pool.map(lambda b: _integrate_block(init[b[0]:b[1]], b[0], spec, grid, dt, steps), blocks)
            )
    else:
        parts = [_integrate_block(init[a:b], a, spec, grid, dt, steps) for a, b in blocks]
    return TrajectoryBundle(np.concatenate(parts, axis=0), dt, spec, seed)


@dataclass(frozen=True)
class HistogramMode:
    mode: str = "snapshot"  # or "time_occupation"
    t_index: int = -1


class Histogram(NamedTuple):
    field: DensityField
    out_of_range: float  # fraction of samples that fell outside the phase box
    samples: int


def empirical_pdf(
    bundle: TrajectoryBundle,
    phase: PhaseGrid,
    axes: Sequence[int],
    mode: HistogramMode = HistogramMode(),
) -> Histogram:
    """Histogram of the selected sites as cell masses.

    Snapshot mode bins every realization at one slice. Time-occupation mode
    bins slices ``0 .. M-1`` of every realization with weight ``dt / T`` each
    and averages over realizations. Samples outside the box are dropped and
    their fraction reported, never clamped into edge cells.
    """
    axes = [int(a) for a in axes]
    if len(axes) != phase.axes_count:
        raise ValidationError(f"{len(axes)} axes given for a {phase.axes_count}-axis grid")
    if any(a < 0 or a >= bundle.states.shape[2] for a in axes):
        raise ValidationError(f"site indices {axes} out of range")
    if mode.mode == "snapshot":
        t = mode.t_index
        if not -bundle.slices <= t < bundle.slices:
            raise ValidationError(f"t_index {t} out of range for {bundle.slices} slices")
        samples = bundle.states[:, t, :][:, axes]
    elif mode.mode == "time_occupation":
        if bundle.slices < 2:
            raise ValidationError("time occupation needs at least two slices")
        samples = bundle.states[:, :-1, :][:, :, axes].reshape(-1, len(axes))
    else:
        raise ValidationError(f"unknown histogram mode {mode.mode!r}")

    idx = phase.cell_index(samples)
    inside = np.all(idx >= 0, axis=1)
    flat = np.ravel_multi_index(tuple(idx[inside].T), phase.shape) if inside.any() else np.empty(0, np.int64)
    counts = np.bincount(flat, minlength=phase.size)
    total = samples.shape[0]
    n_out = total - int(inside.sum())
    if n_out:
        log.info("empirical_pdf: %d of %d samples outside [%g, %g]", n_out, total, phase.u_min, phase.u_max)
    return Histogram(DensityField(phase, counts / total), n_out / total, total)


def sample_moments(bundle: TrajectoryBundle, t_index: int = -1) -> dict:
    """Per-site means, their standard errors, and the mean kinetic energy at one slice."""
    u = bundle.states[:, t_index, :]
    R = u.shape[0]
    means = u.mean(axis=0)
    se = u.std(axis=0, ddof=1) / math.sqrt(R) if R > 1 else np.full(u.shape[1], np.inf)
    ke = np.sum(u * u, axis=1)
    return {
        "means": means,
        "mean_se": se,
        "kinetic_energy": float(ke.mean()),
        "kinetic_energy_se": float(ke.std(ddof=1) / math.sqrt(R)) if R > 1 else math.inf,
    }


def write_bundle_csv(bundle: TrajectoryBundle, path: str | Path) -> None:
    """One row per realization per slice (realization-major): t, u_0 .. u_{N-1}."""
    N = bundle.states.shape[2]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"u_{j}" for j in range(N)])
        for r in range(bundle.realizations):
            for m in range(bundle.slices):
                w.writerow([f"{m * bundle.dt:.17g}"] + [f"{x:.17g}" for x in bundle.states[r, m]])
