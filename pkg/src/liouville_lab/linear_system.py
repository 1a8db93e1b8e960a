"""Explicit time marching written as one causal linear system.

Stacking the slices ``p = (p0, p1, ..., pM)`` turns ``p_{m+1} = S p_m`` with
``S = I - dt L`` into ``A p = q`` where ``A`` has identity diagonal blocks,
``-S`` on the first block subdiagonal, and ``q = (p0, 0, ..., 0)``. ``A`` is
unit block lower triangular, so forward substitution (a sequence of
mat-vecs) solves it without pivoting. The global ``A`` is only materialized
in debug mode for small systems.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import GridMismatch, IntegrationError, ValidationError
from .liouville_solver import FluxOperator
from .phase_space import DensityField

DEBUG_MAX_DIM = 5000


@dataclass(frozen=True)
class CausalSystem:
    step_matrix: sp.csr_matrix = field(repr=False)
    p0: DensityField = field(repr=False)
    dt: float = 0.0
    time_slices: int = 1  # M: number of steps; the system holds M + 1 slices

    @property
    def slice_dim(self) -> int:
        return self.step_matrix.shape[0]

    @property
    def slices(self) -> int:
        return self.time_slices + 1

    @property
    def dimension(self) -> int:
        return self.slice_dim * self.slices


@dataclass(frozen=True)
class SparsityReport:
    s: int
    total_nonzeros: int
    dimension: int

    def as_dict(self) -> dict:
        return {"s": self.s, "total_nonzeros": self.total_nonzeros, "dimension": self.dimension}


def build_causal_system(L: FluxOperator, dt: float, time_slices: int, p0: DensityField) -> CausalSystem:
    if not dt > 0:
        raise ValidationError(f"dt must be positive, got {dt}", code="bad_dt")
    if time_slices < 1:
        raise ValidationError("need at least one time slice")
    if p0.grid != L.phase or p0.values.size != L.shape[0]:
        raise GridMismatch(f"p0 grid {p0.grid} does not match operator grid {L.phase}")
    n = L.shape[0]
    S = (sp.identity(n, format="csr") - dt * L.L).tocsr()
    S.sum_duplicates()
    S.sort_indices()
    return CausalSystem(S, p0, float(dt), int(time_slices))


def forward_solve(sys: CausalSystem) -> list[DensityField]:
    grid = sys.p0.grid
    p = np.array(sys.p0.values)
    out = [sys.p0]
    for m in range(sys.time_slices):
        p = sys.step_matrix @ p
        if not np.all(np.isfinite(p)):
            raise IntegrationError(f"non-finite value in slice {m + 1}")
        out.append(DensityField(grid, p))
    return out


def _slice_values(solution: Sequence[DensityField | np.ndarray]) -> list[np.ndarray]:
    return [np.asarray(s.values if isinstance(s, DensityField) else s, dtype=float) for s in solution]


def residual(sys: CausalSystem, solution: Sequence[DensityField | np.ndarray]) -> float:
    """Largest block-row residual ``max_m |(A p - q)_m|_inf``, applied block-wise."""
    slices = _slice_values(solution)
    if len(slices) != sys.slices:
        raise ValidationError(f"expected {sys.slices} slices, got {len(slices)}")
    worst = float(np.max(np.abs(slices[0] - sys.p0.values)))
    for m in range(sys.time_slices):
        r = slices[m + 1] - sys.step_matrix @ slices[m]
        worst = max(worst, float(np.max(np.abs(r))))
    return worst


def sparsity_report(sys: CausalSystem) -> SparsityReport:
    """Counts structural nonzeros of ``A`` without building it."""
    S = sys.step_matrix
    row_nnz = np.diff(S.indptr)
    # rows of block 0 hold only the identity; later rows add one row of -S
    s = 1 + int(row_nnz.max()) if sys.time_slices >= 1 else 1
    total = sys.dimension + sys.time_slices * S.nnz
    return SparsityReport(s, total, sys.dimension)


def assemble_global(sys: CausalSystem) -> tuple[sp.csr_matrix, np.ndarray]:
    """Debug mode: the full ``A`` and ``q`` (only for dimension <= 5000)."""
    if sys.dimension > DEBUG_MAX_DIM:
        raise ValidationError(
            f"global assembly limited to dimension {DEBUG_MAX_DIM}, system has {sys.dimension}"
        )
    k = sys.slices
    I = sp.identity(sys.slice_dim, format="csr")
    blocks = [[None] * k for _ in range(k)]
    for m in range(k):
        blocks[m][m] = I
        if m:
            blocks[m][m - 1] = -sys.step_matrix
    A = sp.bmat(blocks, format="csr")
    A.sort_indices()
    q = np.zeros(sys.dimension)
    q[: sys.slice_dim] = sys.p0.values
    return A, q


def export_coo(sys: CausalSystem, path: str | Path) -> None:
    """Write ``A`` as ``row col value`` lines, 17 significant digits."""
    A, _ = assemble_global(sys)
    coo = A.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        for i in order:
            fh.write(f"{coo.row[i]} {coo.col[i]} {coo.data[i]:.17g}\n")
