import math

import numpy as np
import pytest
from scipy import stats

from liouville_lab.burgers_dynamics import DynamicsSpec, SpatialGrid
from liouville_lab.ensemble_oracle import (
    HistogramMode,
    InitialEnsembleSpec,
    TrajectoryBundle,
    empirical_pdf,
    run_ensemble,
    sample_initial_conditions,
    sample_moments,
    write_bundle_csv,
)
from liouville_lab.errors import IntegrationError, ValidationError
from liouville_lab.phase_space import ObservableSpec, PhaseGrid, average, marginalize

SPEC = DynamicsSpec("consistent_central", 0.1)
GRID3 = SpatialGrid(3)


@pytest.mark.parametrize("kind, width", [("gaussian", 1e-300), ("uniform", 0.0), ("gaussian", -1.0)])
def test_degenerate_perturbation_rejected(kind, width):
    with pytest.raises(ValidationError, match="degenerate perturbation"):
        InitialEnsembleSpec(np.zeros(3), kind, width, 1, 0)


def test_sampling_reproducible():
    spec = InitialEnsembleSpec(np.zeros(3), "uniform", 0.5, 1, 42)
    a = sample_initial_conditions(spec, GRID3)
    b = sample_initial_conditions(spec, GRID3)
    assert a.tobytes() == b.tobytes()
    assert np.all(np.abs(a) <= 0.5)


def test_substreams_do_not_depend_on_count():
    small = sample_initial_conditions(InitialEnsembleSpec(np.zeros(3), "gaussian", 1.0, 5, 7), GRID3)
    large = sample_initial_conditions(InitialEnsembleSpec(np.zeros(3), "gaussian", 1.0, 50, 7), GRID3)
    assert small.tobytes() == large[:5].tobytes()


def test_gaussian_sample_mean_clt():
    R, sigma = 100_000, 0.1
    base = np.array([0.5, -0.2, -0.3])
    x = sample_initial_conditions(InitialEnsembleSpec(base, "gaussian", sigma, R, 1), GRID3)
    assert np.all(np.abs(x.mean(axis=0) - base) <= 4 * sigma / math.sqrt(R))


def test_constant_trajectory():
    b = run_ensemble(np.full((1, 3), 0.4), SPEC, GRID3, 0.05, 20)
    assert np.all(b.states == 0.4)
    assert b.states.shape == (1, 21, 3)


def test_identical_rows_identical_trajectories():
    row = np.array([0.3, -0.1, 0.2])
    b = run_ensemble(np.stack([row, row]), SPEC, GRID3, 0.05, 10)
    assert b.states[0].tobytes() == b.states[1].tobytes()


def test_worker_count_does_not_change_result():
    init = sample_initial_conditions(InitialEnsembleSpec(np.zeros(3), "gaussian", 0.3, 101, 5), GRID3)
    a = run_ensemble(init, SPEC, GRID3, 0.05, 10, workers=1)
    b = run_ensemble(init, SPEC, GRID3, 0.05, 10, workers=4)
    assert a.states.tobytes() == b.states.tobytes()


def test_integration_failure_names_realization():
    init = np.array([[0.1, 0.2, 0.3], [1e200, -1e200, 0.0]])
    with pytest.raises(IntegrationError) as exc:
        run_ensemble(init, SPEC, GRID3, 1.0, 3)
    assert exc.value.realization == 1


def test_run_validation():
    with pytest.raises(ValidationError):
        run_ensemble(np.zeros((1, 3)), SPEC, GRID3, 0.0, 3)
    with pytest.raises(ValidationError):
        run_ensemble(np.zeros((1, 3)), SPEC, GRID3, 0.1, 0)


def test_delta_histogram_both_modes():
    b = run_ensemble(np.full((4, 3), 0.3), SPEC, GRID3, 0.1, 5)
    phase = PhaseGrid(3, 8, -1, 1)
    snap = empirical_pdf(b, phase, [0, 1, 2], HistogramMode("snapshot", -1))
    occ = empirical_pdf(b, phase, [0, 1, 2], HistogramMode("time_occupation"))
    assert snap.field.values.max() == 1.0
    assert np.count_nonzero(snap.field.values) == 1
    np.testing.assert_allclose(occ.field.values, snap.field.values, atol=1e-15)


def test_snapshot_variance_at_t0():
    R, sigma = 100_000, 0.3
    init = sample_initial_conditions(InitialEnsembleSpec(np.zeros(3), "gaussian", sigma, R, 9), GRID3)
    b = TrajectoryBundle(init[:, None, :], 0.1, SPEC)
    hist = empirical_pdf(b, PhaseGrid(1, 64, -2, 2), [1], HistogramMode("snapshot", 0))
    var = average(hist.field, ObservableSpec("axis_moment", order=2)) - average(
        hist.field, ObservableSpec("axis_mean")
    ) ** 2
    assert abs(var - sigma**2) <= 0.05 * sigma**2


def test_out_of_range_reported_not_clamped():
    init = np.array([[0.0, 0.0, 0.0], [5.0, 0.0, 0.0], [0.0, -9.0, 0.0], [0.1, 0.1, 0.1]])
    b = TrajectoryBundle(init[:, None, :], 0.1, SPEC)
    hist = empirical_pdf(b, PhaseGrid(3, 4, -1, 1), [0, 1, 2], HistogramMode("snapshot", 0))
    assert hist.out_of_range == 0.5
    assert abs(hist.field.values.sum() + hist.out_of_range - 1) <= 1e-12
    edge = hist.field.shaped
    assert edge[-1].sum() == 0 and edge[:, 0].sum() == 0


def test_factorized_initial_histogram():
    # independent per-site perturbations: joint 2-axis histogram vs product of marginals, G-test
    R = 100_000
    init = sample_initial_conditions(InitialEnsembleSpec(np.zeros(3), "uniform", 1.0, R, 11), GRID3)
    b = TrajectoryBundle(init[:, None, :], 0.1, SPEC)
    hist = empirical_pdf(b, PhaseGrid(2, 6, -1, 1), [0, 2], HistogramMode("snapshot", 0))
    counts = hist.field.shaped * R
    _, pval, _, _ = stats.chi2_contingency(counts, lambda_="log-likelihood")
    assert pval > 1e-3
    joint = hist.field.shaped
    prod = np.outer(marginalize(hist.field, [0]).values, marginalize(hist.field, [1]).values)
    assert np.max(np.abs(joint - prod)) <= 5 * math.sqrt(1 / 36 / R)


def test_sample_moments_shape():
    init = sample_initial_conditions(InitialEnsembleSpec(np.zeros(3), "gaussian", 0.2, 1000, 2), GRID3)
    b = run_ensemble(init, SPEC, GRID3, 0.05, 4)
    m = sample_moments(b)
    assert m["means"].shape == (3,)
    assert np.all(m["mean_se"] > 0)


def test_bundle_csv(tmp_path):
    b = run_ensemble(np.array([[0.1, 0.2, 0.3], [0.0, 0.0, 0.0]]), SPEC, GRID3, 0.5, 2)
    path = tmp_path / "traj.csv"
    write_bundle_csv(b, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,u_0,u_1,u_2"
    assert len(lines) == 1 + 2 * 3
    assert lines[1].split(",")[1:] == ["0.10000000000000001", "0.20000000000000001", "0.29999999999999999"]
