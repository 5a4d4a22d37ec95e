import math

import numpy as np
import pytest

from qubitbath.model import DissipatorSpec, DriveSpec
from qubitbath.oracle import TimeGrid, integrate_lme
from qubitbath.qsd import (
    NoiseStream, UnstableTrajectoryError, ensemble_average, evolve_batch,
    evolve_trajectory_exact, noise_paths, ou_path, ou_step, run_qsd_ensemble,
)
from qubitbath.metrics import trace_distance_series
from qubitbath.rng import complex_normal, substream

OFF = DriveSpec("oscillatory", B_DC=0.0, B_AC=0.0)


def test_ou_step_examples(rng):
    z = 0.3 - 0.2j
    assert ou_step(z, 2.0, 0.0, 1.5 + 0.5j) == z
    u = complex_normal(rng, 100_000)
    fresh = ou_step(np.full(u.shape, z), 2.0, 50.0, u)
    assert abs(fresh.mean()) < 4 * math.sqrt(1.0 / 100_000)
    assert np.mean(np.abs(fresh) ** 2) == pytest.approx(1.0, abs=0.02)


def test_ou_stationarity_monte_carlo(rng):
    gamma, dt, n = 3.0, 0.2, 100_000
    z0 = math.sqrt(gamma / 2) * complex_normal(rng, n)
    z1 = ou_step(z0, gamma, dt, complex_normal(rng, n))
    m2 = np.abs(z1) ** 2
    assert abs(m2.mean() - gamma / 2) <= 3 * m2.std() / math.sqrt(n)
    lag = np.mean(z1 * np.conj(z0)).real
    assert lag == pytest.approx(gamma / 2 * math.exp(-gamma * dt), abs=0.02)


def test_noise_stream_is_deterministic():
    g = TimeGrid(0, 1, 0.1)
    a = NoiseStream(5, 3, 2.0).path(g)
    b = NoiseStream(5, 3, 2.0).path(g)
    c = NoiseStream(5, 4, 2.0).path(g)
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    assert np.array_equal(noise_paths(5, [3, 4], 2.0, g), np.stack([a, c]))
    with pytest.raises(ValueError):
        NoiseStream(5, 0, 0.0)


def test_substreams_independent_of_order():
    x = substream(1, 7, 0, "ou").random(3)
    substream(1, 6, 0, "ou").random(100)
    assert np.array_equal(x, substream(1, 7, 0, "ou").random(3))


def test_closed_system_keeps_norm():
    g = TimeGrid(0, 15, 0.15)
    tr = evolve_trajectory_exact([1, 0], DriveSpec(), DissipatorSpec.uniform(0, 0.3),
                                 NoiseStream(1, 0, 1 / 0.15), g, refine=8)
    assert np.max(np.abs(tr.squared_norm - 1)) < 1e-7


def test_excited_state_decay():
    g = TimeGrid(0, 5, 0.01)
    tr = evolve_trajectory_exact([0, 1], OFF, DissipatorSpec.uniform(1, 0), np.zeros((2, len(g))), g)
    assert np.max(np.abs(tr.squared_norm[0] - np.exp(-g.times))) < 1e-6


def test_ground_state_fixed_point():
    g = TimeGrid(0, 5, 0.1)
    tr = evolve_trajectory_exact([1, 0], DriveSpec("oscillatory", B_AC=0.0),
                                 DissipatorSpec.uniform(1, 0), np.zeros((2, len(g))), g, refine=4)
    assert np.max(np.abs(np.abs(tr.psi[0, :, 0]) - 1)) < 1e-6
    assert np.all(tr.psi[0, :, 1] == 0)


def test_overflow_reports_trajectory():
    g = TimeGrid(0, 1, 0.1)
    noise = np.full((2, 2, len(g)), 1e4 + 0j)
    with pytest.raises(UnstableTrajectoryError, match="trajectory 8"):
        evolve_batch([1, 0], OFF, DissipatorSpec.uniform(1, 0.3), noise, g, [8, 9])


def test_ensemble_average_examples():
    g = TimeGrid(0, 3, 0.15)
    tr = evolve_trajectory_exact([1, 0], DriveSpec(), DissipatorSpec.uniform(0, 0), np.zeros((2, len(g))), g)
    avg = ensemble_average(tr, normalize=False)
    assert np.allclose(avg.rho, tr.outer_products()[0], atol=1e-12)
    many = evolve_batch([1, 0], DriveSpec(), DissipatorSpec.uniform(0, 0), np.zeros((5, 2, len(g))), g)
    assert np.allclose(ensemble_average(many, normalize=False).rho, avg.rho, atol=1e-14)
    other = evolve_trajectory_exact([1, 0], DriveSpec(), DissipatorSpec.uniform(0, 0),
                                    np.zeros((2, 5)), TimeGrid(0, 1, 0.25))
    with pytest.raises(ValueError):
        ensemble_average([tr, other])


def test_ensemble_excited_decay_unnormalized():
    # the excited amplitude receives no noise when f = 0, so every trajectory
    # carries exactly exp(-t) there and the standard error vanishes
    g = TimeGrid(0, 3, 0.15)
    ens = run_qsd_ensemble([0, 1], OFF, DissipatorSpec.uniform(1, 0), g, 2000, 1.0, 11,
                           normalize=False, refine=4)
    err = np.abs(ens.rho[:, 1, 1].real - np.exp(-g.times))
    assert np.all(err <= 3 * ens.stderr[:, 1, 1].real + 1e-6)


def test_closed_system_matches_oracle():
    g = TimeGrid(0, 5, 0.05)
    diss = DissipatorSpec.uniform(0, 0)
    ens = run_qsd_ensemble([1, 0], DriveSpec(), diss, g, 3, 1 / 0.05, 1, refine=5)
    orc = integrate_lme(np.diag([1, 0]), DriveSpec(), diss, g, refine=50)
    assert np.max(np.abs(ens.rho - orc)) < 1e-6


def test_worker_count_does_not_change_result():
    g = TimeGrid(0, 2, 0.1)
    diss = DissipatorSpec.uniform(1, 0.3)
    a = run_qsd_ensemble([1, 0], DriveSpec(), diss, g, 60, 10.0, 3, chunk_size=25, workers=1)
    b = run_qsd_ensemble([1, 0], DriveSpec(), diss, g, 60, 10.0, 3, chunk_size=25, workers=2)
    assert np.array_equal(a.rho, b.rho) and np.array_equal(a.stderr, b.stderr)


def test_normalized_average_is_hermitian_unit_trace():
    g = TimeGrid(0, 3, 0.15)
    ens = run_qsd_ensemble([1, 0], DriveSpec(), DissipatorSpec.uniform(1, 0.4), g, 200, 1 / 0.15, 2)
    assert np.array_equal(ens.rho, np.conj(np.swapaxes(ens.rho, -1, -2)))
    assert np.allclose(np.trace(ens.rho, axis1=1, axis2=2), 1.0, atol=1e-14)


@pytest.mark.slow
def test_grid_bias_shrinks_with_step():
    # the OU correlation time is tied to the grid, so the ensemble only
    # approaches the master equation as the step shrinks
    drive, diss = DriveSpec(omega=0.9048374180359595), DissipatorSpec.uniform(1, 0.401312339887548)
    errs = []
    for dt in (0.15, 0.05):
        g = TimeGrid(0, 3, dt)
        ens = run_qsd_ensemble([1, 0], drive, diss, g, 4000, 1 / dt, 21)
        orc = integrate_lme(np.diag([1, 0]), drive, diss, g, refine=30)
        errs.append(trace_distance_series(ens.rho, orc).max())
    assert errs[1] < 0.5 * errs[0]
    assert errs[1] < 0.03


def test_ou_path_shape():
    u = np.ones((3, 2, 4), dtype=complex)
    assert ou_path(u, 1.0, 0.1).shape == (3, 2, 4)
