import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from liouville_lab.burgers_dynamics import DynamicsSpec, SpatialGrid
from liouville_lab.errors import AssemblyError, PositivityViolation, ValidationError
from liouville_lab.liouville_solver import (
    PhaseVelocityField,
    assemble_operator,
    boundary_mask,
    burgers_field,
    constant_field,
    evolve,
    max_stable_dt,
    rotation_field,
    zero_field,
)
from liouville_lab.phase_space import DensityField, PhaseGrid, axis_means


def brute_force_step(p, speed, D, du, dt):
    """Cell-by-cell 1-D donor-cell update with no-flux walls; independent of the sparse path."""
    n = len(p)
    flux = [0.0] * (n + 1)
    for f in range(1, n):
        a = 0.5 * (speed[f - 1] + speed[f])
        up = p[f - 1] if a > 0 else p[f]
        flux[f] = a * up / du - D * (p[f] - p[f - 1]) / du**2
    return [p[i] - dt * (flux[i + 1] - flux[i]) for i in range(n)]


def test_zero_operator():
    op = assemble_operator(PhaseGrid(2, 5, -1, 1), zero_field(2))
    assert op.L.nnz == 0 or np.all(op.L.data == 0)


def test_constant_speed_1d_structure():
    g = PhaseGrid(1, 3, 0, 3)
    op = assemble_operator(g, constant_field([1.0]))
    dense = op.L.toarray()
    np.testing.assert_array_equal(dense, [[1, 0, 0], [-1, 1, 0], [0, -1, 0]])
    np.testing.assert_array_equal(op.column_sums(), 0)


@pytest.mark.parametrize("speed, D", [(0.7, 0.0), (-1.3, 0.0), (0.4, 0.05), (0.0, 0.2)])
def test_matches_brute_force(speed, D):
    g = PhaseGrid(1, 12, -1, 1)
    rng = np.random.default_rng(1)
    p0 = rng.random(12)
    p0 /= p0.sum()
    speeds = [speed * (1 + 0.5 * np.sin(c)) for c in g.centers()]
    vel = PhaseVelocityField(lambda mesh: [speed * (1 + 0.5 * np.sin(mesh[0]))], D)
    op = assemble_operator(g, vel)
    dt = max_stable_dt(g, vel, 0.5)
    ref = list(p0)
    for _ in range(20):
        ref = brute_force_step(ref, speeds, D, g.du, dt)
    out, _ = evolve(DensityField(g, p0), op, dt, 20)
    np.testing.assert_allclose(out.values, ref, atol=1e-14)


def test_delta_center_moves_at_speed():
    g = PhaseGrid(1, 200, 0, 20)
    p0 = DensityField.delta(g, (20,))
    op = assemble_operator(g, constant_field([1.0]))
    dt, k = 0.05, 40
    out, diag = evolve(p0, op, dt, k)
    c0 = axis_means(p0)[0]
    assert axis_means(out)[0] == pytest.approx(c0 + k * dt * 1.0, abs=1e-12)
    assert diag.max_mass_drift() <= 1e-12
    # first-order smearing: the delta has spread to several cells
    assert np.count_nonzero(out.values > 1e-6) > 3


def test_rotation_operator_discretely_divergence_free():
    g = PhaseGrid(2, 16, -1, 1)
    vel = rotation_field()
    op = assemble_operator(g, vel)
    assert np.max(np.abs(op.column_sums())) <= 1e-12
    dp = op.apply(DensityField.uniform(g).values)
    interior = ~boundary_mask(g)
    assert np.max(np.abs(dp[interior])) <= 1e-12 * 1.0
    assert op.max_row_nonzeros() <= 2 * 2 + 1


def test_assembly_rejects_non_finite_speed():
    vel = PhaseVelocityField(lambda mesh: [np.where(mesh[0] > 0.5, np.nan, 1.0)])
    with pytest.raises(AssemblyError, match="cell"):
        assemble_operator(PhaseGrid(1, 4, 0, 1), vel)


def test_max_stable_dt_examples():
    g = PhaseGrid(1, 10, 0, 1)
    assert max_stable_dt(g, constant_field([2.0]), 0.9) == pytest.approx(0.045, rel=1e-14)
    assert max_stable_dt(g, constant_field([0.0], diffusion=1.0), 0.9) == pytest.approx(0.0045, rel=1e-14)
    assert max_stable_dt(g, zero_field(1), 0.9) == math.inf
    with pytest.raises(ValidationError):
        max_stable_dt(g, zero_field(1), 1.5)


def test_max_stable_dt_burgers_keeps_positivity():
    g = PhaseGrid(3, 64, -2, 2)
    vel = burgers_field(DynamicsSpec("consistent_central", 0.1), SpatialGrid(3))
    dt = max_stable_dt(g, vel, 0.9)
    op = assemble_operator(g, vel)
    # I - dt L must be entrywise nonnegative
    S = (-dt * op.L).tocoo()
    diag = S.row == S.col
    assert np.all(1 + S.data[diag] >= 0)
    assert np.all(S.data[~diag] >= 0)
    p0 = DensityField.gaussian(g, [0.5, -0.2, -0.3], 0.3)
    out, d = evolve(p0, op, dt, 50)
    assert min(d.min_value) >= -1e-12


def test_identity_evolution():
    g = PhaseGrid(2, 6, -1, 1)
    p0 = DensityField.gaussian(g, [0.1, 0.2], 0.3)
    out, _ = evolve(p0, assemble_operator(g, zero_field(2)), 0.1, 25)
    np.testing.assert_array_equal(out.values, p0.values)


def test_positivity_violation_raised():
    g = PhaseGrid(1, 10, 0, 1)
    op = assemble_operator(g, constant_field([1.0]))
    p0 = DensityField.delta(g, (3,))
    with pytest.raises(PositivityViolation) as exc:
        evolve(p0, op, 0.5, 3)
    assert exc.value.step == 1


def test_rk2_conserves_mass():
    g = PhaseGrid(2, 20, -1, 1)
    vel = rotation_field()
    op = assemble_operator(g, vel)
    p0 = DensityField.gaussian(g, [0.3, 0.0], 0.15)
    _, d = evolve(p0, op, 0.5 * max_stable_dt(g, vel), 100, "rk2")
    assert d.max_mass_drift() <= 1e-12


@settings(max_examples=20, deadline=None)
@given(
    arrays(np.float64, (6, 6), elements=st.floats(0, 1)),
    arrays(np.float64, (6, 6), elements=st.floats(0, 1)),
    st.floats(0, 2),
    st.floats(0, 2),
)
def test_linearity(x, y, a, b):
    g = PhaseGrid(2, 6, -1, 1)
    vel = PhaseVelocityField(lambda m: [-m[1] + 0.3 * m[0], m[0] * m[1]], 0.01)
    op = assemble_operator(g, vel)
    dt = max_stable_dt(g, vel, 0.9)
    ex, _ = evolve(DensityField(g, x), op, dt, 10)
    ey, _ = evolve(DensityField(g, y), op, dt, 10)
    exy, _ = evolve(DensityField(g, a * x + b * y), op, dt, 10)
    np.testing.assert_allclose(exy.values, a * ex.values + b * ey.values, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(
    st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(0, 0.3),
    st.floats(0.1, 1.0),
)
def test_conservation_and_positivity_random_fields(c0, c1, c2, D, cfl):
    g = PhaseGrid(2, 10, -1, 1)
    vel = PhaseVelocityField(lambda m: [c0 + c1 * m[1] ** 2, c2 * m[0] - c1 * m[1]], D)
    op = assemble_operator(g, vel)
    assert np.max(np.abs(op.column_sums())) <= 1e-12 * max(1.0, abs(op.L).max())
    dt = max_stable_dt(g, vel, cfl)
    if not math.isfinite(dt):
        dt = 0.1
    p0 = DensityField.gaussian(g, [0.1, -0.1], 0.3)
    _, d = evolve(p0, op, dt, 60)
    assert d.max_mass_drift() <= 1e-12
    assert min(d.min_value) >= -1e-12


def test_diagnostics_csv(tmp_path):
    g = PhaseGrid(1, 4, 0, 1)
    p0 = DensityField.uniform(g)
    _, d = evolve(p0, assemble_operator(g, constant_field([0.1])), 0.25, 2)
    path = tmp_path / "diag.csv"
    d.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "step,time,mass,min_value,boundary_mass"
    assert len(lines) == 4
    assert lines[2].startswith("1,0.25,")
