"""Qubit counts and cost-scaling models for Liouville-based ensemble simulation.

Conventions (model only, proportionality constants dropped):

* each encoded real variable with ``n`` discrete levels takes
  ``ceil(log2 n)`` qubits;
* ``polylog(G, 1/eps)`` is realized as ``log2(G) * log2(1/eps)``.

All functions are plain integer / float arithmetic; big integers stay exact.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from decimal import Decimal, InvalidOperation

from .errors import ValidationError

QUBIT_CONVENTION = "qubits = encoded variables * ceil(log2 n)"
POLYLOG_CONVENTION = "polylog(G, 1/eps) = log2(G) * log2(1/eps); proportionality only"
CLASSICAL_CONVENTION = "C_c = s * T * G; proportionality only"


def ceil_log2(n: int) -> int:
    """Exact ``ceil(log2 n)`` for a positive integer."""
    n = int(n)
    if n < 1:
        raise ValidationError(f"ceil_log2 needs n >= 1, got {n}")
    return (n - 1).bit_length()


@dataclass(frozen=True)
class ProblemShape:
    G: int = 1
    F: int = 1
    z: int = 1
    n: int = 2

    def __post_init__(self):
        for name in ("G", "F", "z", "n"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValidationError(f"{name} must be a positive integer, got {v!r}")
        if self.z > self.G:
            raise ValidationError(f"stencil connectivity z={self.z} exceeds G={self.G}")


@dataclass(frozen=True)
class CostQuery:
    s: int
    phi: float
    T: float
    G: int
    epsilon: float

    def __post_init__(self):
        if self.s < 1:
            raise ValidationError("sparsity s must be >= 1")
        if not 0 < self.phi <= 1:
            raise ValidationError(f"fidelity phi must lie in (0, 1], got {self.phi}")
        if not self.T > 0:
            raise ValidationError("time span T must be positive")
        if self.G < 2:
            raise ValidationError("G must be >= 2 (log2 G vanishes at G = 1)")
        if not 0 < self.epsilon < 1:
            raise ValidationError(f"epsilon must lie in (0, 1), got {self.epsilon}")


@dataclass
class ResourceReport:
    qubits: int
    cost_quantum: float | None = None
    cost_classical: float | None = None
    inputs: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        doc = asdict(self)
        doc["convention_notes"] = doc.pop("notes")
        return json.dumps(doc, sort_keys=True, default=str)


def qubits_full(shape: ProblemShape) -> int:
    return shape.G * shape.F * ceil_log2(shape.n)


def qubits_marginal(shape: ProblemShape) -> int:
    return shape.z * shape.F * ceil_log2(shape.n)


def cost_quantum(query: CostQuery) -> float:
    polylog = math.log2(query.G) * math.log2(1.0 / query.epsilon)
    return query.s * query.phi * query.T**2 * polylog


def cost_classical(s: int, T: float, G: int) -> float:
    if s < 1 or not T > 0 or G < 1:
        raise ValidationError("cost_classical needs positive s, T and G")
    return float(s) * T * G


def parse_dof(text: str | int) -> int:
    """Exact integer from ``"1e24"``, ``"2**30"``-free decimal text or an int."""
    if isinstance(text, int):
        return text
    try:
        value = Decimal(str(text).strip())
    except InvalidOperation:
        raise ValidationError(f"cannot parse degrees of freedom {text!r}") from None
    if value != value.to_integral_value() or value < 1:
        raise ValidationError(f"degrees of freedom must be a positive integer, got {text!r}")
    return int(value)


def dynamic_approach_qubits(dof: int) -> int:
    """``ceil(log2 dof)`` qubits to index ``dof`` amplitudes."""
    dof = int(dof)
    if dof < 1:
        raise ValidationError("dof must be >= 1")
    return ceil_log2(dof)


def dynamic_report(dof: int) -> ResourceReport:
    q = dynamic_approach_qubits(dof)
    notes = ["qubits = ceil(log2 dof)"]
    if dof == 1:
        notes.append("degenerate input: a single state needs no qubits")
    return ResourceReport(q, inputs={"dof": str(dof)}, notes=notes)


def shape_report(shape: ProblemShape, marginal: bool, query: CostQuery | None = None) -> ResourceReport:
    q = qubits_marginal(shape) if marginal else qubits_full(shape)
    notes = [QUBIT_CONVENTION]
    rep = ResourceReport(q, inputs={"kind": "marginal" if marginal else "full", **asdict(shape)}, notes=notes)
    if query is not None:
        rep.cost_quantum = cost_quantum(query)
        rep.cost_classical = cost_classical(query.s, query.T, query.G)
        rep.inputs.update({f"cost_{k}": v for k, v in asdict(query).items()})
        notes += [POLYLOG_CONVENTION, CLASSICAL_CONVENTION]
    return rep


def crossover_sweep(
    s: int = 8, phi: float = 1.0, epsilon: float = 2.0**-10, log2_G: range = range(10, 41)
) -> list[dict]:
    """Quantum/classical cost ratio with the time span tied to ``T = G**(1/3)``."""
    rows = []
    for k in log2_G:
        G = 2**k
        T = G ** (1.0 / 3.0)
        cq = cost_quantum(CostQuery(s, phi, T, G, epsilon))
        cc = cost_classical(s, T, G)
        rows.append({"log2_G": k, "G": G, "T": T, "cost_quantum": cq, "cost_classical": cc, "ratio": cq / cc})
    return rows


def sweep_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    keys = list(rows[0]) if rows else []
    w.writerow(keys)
    for r in rows:
        w.writerow([f"{r[k]:.17g}" if isinstance(r[k], float) else r[k] for k in keys])
    return buf.getvalue()
