import math

import numpy as np
import pytest

from logic import diagnostics
from logic.evolve import (
    CLASSICAL,
    QUANTUM,
    Evolution,
    StepError,
    StepPlan,
    estimate_splitting_error,
    evolve,
    evolve_pair,
    kick_phase,
    moyal_kick_phase,
    step,
)
from logic.grid import Field, make_grid
from logic.model import ModelParams
from logic.states import GaussianSpec, gaussian_wigner


def _run(field, plan, n_steps):
    return Evolution(field, plan).advance(n_steps).field


def test_quartic_moyal_identity(duffing_params):
    rng = np.random.default_rng(7)
    dt, hbar, B = 1e-3, duffing_params.hbar, duffing_params.B_coef
    for _ in range(10):
        q = rng.uniform(-8, 8, 100)
        xi = rng.uniform(-50, 50, 100)
        t = rng.uniform(0, 20)
        quantum = np.diag(kick_phase(q, xi, t, dt, duffing_params, QUANTUM))
        classical = np.diag(kick_phase(q, xi, t, dt, duffing_params, CLASSICAL))
        correction = np.exp(1j * dt * hbar ** 2 * B * q * xi ** 3)
        np.testing.assert_allclose(quantum, classical * correction, rtol=0, atol=1e-13)


def test_closed_form_kick_matches_potential_difference(duffing_params):
    q = np.linspace(-6, 6, 33)
    xi = np.linspace(-40, 40, 29)
    closed = kick_phase(q, xi, 0.81, 1e-3, duffing_params, QUANTUM)
    reference = moyal_kick_phase(q, xi, 0.81, 1e-3, duffing_params)
    np.testing.assert_allclose(closed, reference, atol=1e-10)


def test_modes_agree_without_quartic_term(duffing_grid):
    params = ModelParams(B_coef=0.0)
    f = gaussian_wigner(GaussianSpec.coherent(0.5, 0.0, params.hbar), duffing_grid, params)
    quantum = step(f, 0.0, 1e-3, StepPlan(duffing_grid, params, 1e-3, QUANTUM))
    classical = step(f, 0.0, 1e-3, StepPlan(duffing_grid, params, 1e-3, CLASSICAL))
    assert np.max(np.abs(quantum.values - classical.values)) < 1e-12


def test_quantum_mode_needs_hbar(duffing_grid):
    with pytest.raises(ValueError):
        StepPlan(duffing_grid, ModelParams(hbar=0.0), 1e-3, QUANTUM)
    with pytest.raises(ValueError):
        StepPlan(duffing_grid, ModelParams(), 0.0, CLASSICAL)


@pytest.mark.slow
def test_harmonic_gaussian_returns_after_one_period(harmonic_params):
    grid = make_grid(256, 256, (-8.0, 8.0), (-8.0, 8.0))
    f0 = gaussian_wigner(GaussianSpec.coherent(2.0, 0.0, 1.0), grid, harmonic_params)
    period = 2 * math.pi
    plan = StepPlan(grid, harmonic_params, period / 6283, QUANTUM)

    result = evolve(f0, 0.0, period, plan, schedule=[period / 4, period / 2, period],
                    diagnostics_every=1000)
    error = diagnostics.distance(result.final, f0, "L2")
    assert error < 1e-4

    bound = 1.0 / (math.pi * harmonic_params.hbar)
    for field in result.checkpoints:
        assert field.real.max() <= bound * (1 + 1e-3)
    # a quarter turn carries (2, 0) to (0, -2)
    quarter = result.checkpoints[0]
    assert diagnostics.moment(quarter, 1, 0) == pytest.approx(0.0, abs=1e-3)
    assert diagnostics.moment(quarter, 0, 1) == pytest.approx(-2.0, abs=1e-3)


def _spreading_gaussian(grid, q0, p0, s2, D, t, m=1.0):
    """Closed-form free-particle density with momentum diffusion."""
    mq = q0 + p0 * t / m
    sqq = s2 + s2 * t ** 2 / m ** 2 + 2 * D * t ** 3 / (3 * m ** 2)
    sqp = s2 * t / m + D * t ** 2 / m
    spp = s2 + 2 * D * t
    det = sqq * spp - sqp ** 2
    Q, P = grid.mesh()
    dq, dp = Q - mq, P - p0
    quad = (spp * dq ** 2 - 2 * sqp * dq * dp + sqq * dp ** 2) / det
    return np.exp(-0.5 * quad) / (2 * math.pi * math.sqrt(det))


@pytest.mark.slow
def test_free_particle_spreads_like_the_closed_form(free_params, small_grid):
    s2 = free_params.hbar / 2.0
    f0 = gaussian_wigner(GaussianSpec.coherent(-0.5, 0.5, free_params.hbar), small_grid, free_params)
    plan = StepPlan(small_grid, free_params, 1e-3, CLASSICAL)
    f1 = _run(f0, plan, 1000)
    expected = _spreading_gaussian(small_grid, -0.5, 0.5, s2, free_params.D, 1.0)
    assert np.max(np.abs(f1.values - expected)) < 1e-6


def test_heating_rate(free_params, small_grid):
    f0 = gaussian_wigner(GaussianSpec.coherent(0.0, 0.0, free_params.hbar), small_grid, free_params)
    plan = StepPlan(small_grid, free_params, 1e-3, QUANTUM)
    f1 = _run(f0, plan, 1000)
    rate = (diagnostics.energy(f1, free_params) - diagnostics.energy(f0, free_params)) / f1.time
    assert rate == pytest.approx(free_params.D / free_params.m, rel=1e-2)


@pytest.mark.slow
@pytest.mark.parametrize("mode", [QUANTUM, CLASSICAL])
def test_step_halving_is_second_order(duffing_params, duffing_grid, mode):
    f0 = gaussian_wigner(GaussianSpec.coherent(1.0, 0.0, duffing_params.hbar), duffing_grid, duffing_params)
    macro, steps = 1e-2, 10
    fields = [_run(f0, StepPlan(duffing_grid, duffing_params, macro / 2 ** j, mode), steps * 2 ** j)
              for j in range(3)]
    err_coarse = diagnostics.distance(fields[0], fields[1], "L2")
    err_fine = diagnostics.distance(fields[1], fields[2], "L2")
    assert 3.7 <= err_coarse / err_fine <= 4.3


@pytest.mark.slow
def test_splitting_error_is_cubic(duffing_params, duffing_grid):
    f0 = gaussian_wigner(GaussianSpec.coherent(1.0, 0.0, duffing_params.hbar), duffing_grid, duffing_params)
    plan = StepPlan(duffing_grid, duffing_params, 2e-2, QUANTUM)
    dts = np.array([2e-2, 1e-2, 5e-3])
    errors = np.array([estimate_splitting_error(f0, 0.3, dt, plan) for dt in dts])
    slope = np.polyfit(np.log(dts), np.log(errors), 1)[0]
    assert slope == pytest.approx(3.0, abs=0.2)


@pytest.mark.slow
def test_norm_conserved_over_many_steps(duffing_params):
    grid = make_grid(64, 64, (-4.0, 4.0), (-8.0, 8.0))
    f0 = gaussian_wigner(GaussianSpec((1.0, 0.0), (0.3, 0.5)), grid, duffing_params)
    f1 = _run(f0, StepPlan(grid, duffing_params, 1e-3, QUANTUM), 10_000)
    assert abs(f1.norm() - f0.norm()) < 1e-8


def test_classical_positivity_from_positive_seed(duffing_params, duffing_grid):
    f0 = gaussian_wigner(GaussianSpec.coherent(1.0, 0.0, duffing_params.hbar), duffing_grid, duffing_params)
    f1 = _run(f0, StepPlan(duffing_grid, duffing_params, 1e-3, CLASSICAL), 100)
    assert diagnostics.min_value(f1) >= -1e-8 * f1.real.max()


def test_step_rejects_non_finite(duffing_params, duffing_grid):
    values = np.zeros(duffing_grid.shape)
    values[3, 3] = np.nan
    with pytest.raises(StepError):
        step(Field(duffing_grid, values), 0.0, 1e-3, StepPlan(duffing_grid, duffing_params, 1e-3, CLASSICAL))


def test_evolve_to_start_time_is_identity(duffing_params, duffing_grid):
    f0 = gaussian_wigner(GaussianSpec.coherent(1.0, 0.0, duffing_params.hbar), duffing_grid, duffing_params)
    result = evolve(f0, 0.0, 0.0, StepPlan(duffing_grid, duffing_params, 1e-3, QUANTUM), schedule=[0.0])
    np.testing.assert_array_equal(result.final.values, f0.values)


def test_evolve_records_and_checkpoints(duffing_params, duffing_grid):
    f0 = gaussian_wigner(GaussianSpec.coherent(1.0, 0.0, duffing_params.hbar), duffing_grid, duffing_params)
    seen = []
    result = evolve(f0, 0.0, 0.05, StepPlan(duffing_grid, duffing_params, 1e-3, CLASSICAL),
                    schedule=[0.02, 0.05], diagnostics_every=10, on_checkpoint=seen.append)
    frame = result.frame()
    assert list(frame.columns) == diagnostics.DIAGNOSTIC_COLUMNS
    np.testing.assert_allclose(frame["time"], [0.0, 0.01, 0.02, 0.03, 0.04, 0.05], atol=1e-12)
    assert [f.time for f in seen] == pytest.approx([0.02, 0.05])
    assert frame["l1"].isna().all()


def test_twin_run_reports_distances(duffing_params, duffing_grid):
    f0 = gaussian_wigner(GaussianSpec.coherent(1.0, 0.0, duffing_params.hbar), duffing_grid, duffing_params)
    pair = evolve_pair(f0, 0.0, 0.02,
                       StepPlan(duffing_grid, duffing_params, 1e-3, QUANTUM),
                       StepPlan(duffing_grid, duffing_params, 1e-3, CLASSICAL),
                       schedule=[0.02], diagnostics_every=10)
    quantum, classical = pair.frames()
    assert quantum["l1"].iloc[0] == 0.0
    assert quantum["l1"].iloc[-1] > 0.0
    np.testing.assert_allclose(quantum["l1"], classical["l1"])
