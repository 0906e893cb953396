import numpy as np
import pytest
from pydantic import ValidationError
from src.dmdfm_pipeline import DmdfmConfig
from src.errors import DimensionMismatch, NonConvergence
from src.simulation import (
    AVERAGE_LABEL,
    DESK_CELLS,
    McCell,
    MonteCarloRunner,
    PipelineReplicationEstimator,
    SimulationConfig,
    SimulationTruth,
    generate_panel,
    grid_configs,
    run_forecast_experiment,
    run_monte_carlo,
    run_replication,
)

ZERO = (0.0, 0.0)


def quiet_config(**overrides):
    """Design with every stochastic component switched off."""
    base = dict(
        n=30, t=8, burn_in=100,
        eta_variance=0.0, g_innovation_variance=0.0, tau_variance=0.0,
        nu_variance=0.0, omega_variance=0.0, x_noise_variance=0.0,
        eps_ar_support=ZERO, g_ar_support=ZERO, error_loading_support=ZERO,
        level_loading_support=ZERO, q_ar_support=ZERO, zeta_support=ZERO,
    )
    base.update(overrides)
    return SimulationConfig(**base)


def test_generation_is_deterministic():
    config = SimulationConfig(n=20, t=5, seed=3)
    first, truth_a = generate_panel(config, rep_index=4)
    second, truth_b = generate_panel(config, rep_index=4)
    np.testing.assert_array_equal(first.y, second.y)
    np.testing.assert_array_equal(first.x, second.x)
    np.testing.assert_array_equal(truth_a.factors, truth_b.factors)

    other, _ = generate_panel(config, rep_index=5)
    assert not np.array_equal(first.y, other.y)


def test_shapes():
    data, truth = generate_panel(SimulationConfig(n=25, t=7, n_regressors=4))
    assert data.y.shape == (25, 7)
    assert data.x.shape == (25, 7, 4)
    assert truth.factors.shape == (25, 7, 2)
    assert truth.error_factors.shape == (7, 2)
    np.testing.assert_array_equal(truth.coefficients, [0.6, 0.8, 1.0])


def test_quiet_design_settles_at_fixed_point():
    data, truth = generate_panel(quiet_config())
    expected = truth.intercepts / 0.4
    np.testing.assert_allclose(data.y, np.repeat(expected[:, None], 8, axis=1), atol=1e-10)
    assert np.all(data.x == 0)


def test_observables_weight_both_factors_equally():
    data, truth = generate_panel(SimulationConfig(n=80, t=6, seed=3, x_noise_variance=0.0))
    centered = data.x - data.x.mean(axis=0, keepdims=True)
    within = np.einsum("ntj,ntk->jk", centered, centered) / (80 * 6)
    eigenvalues = np.linalg.eigvalsh(within)
    np.testing.assert_allclose(eigenvalues[-2:], [100.0, 100.0], rtol=1e-8)
    np.testing.assert_allclose(eigenvalues[:-2], 0.0, atol=1e-6)
    assert truth.x_loadings.shape == (10, 2)


def test_omega_variance():
    _, truth = generate_panel(SimulationConfig(n=500, t=1000, burn_in=0, n_regressors=1))
    assert np.var(truth.omega) == pytest.approx(0.25, rel=0.01)


def test_epsilon_autocorrelation_matches_draw():
    _, truth = generate_panel(SimulationConfig(n=40, t=500, seed=7, n_regressors=1))
    eps = truth.epsilon - truth.epsilon.mean(axis=1, keepdims=True)
    ac = (eps[:, 1:] * eps[:, :-1]).sum() / (eps ** 2).sum()
    assert ac == pytest.approx(truth.rho_eps, abs=0.03)


def test_truth_json_round_trip_keeps_factors():
    _, truth = generate_panel(SimulationConfig(n=10, t=5))
    restored = SimulationTruth.from_json_dict(truth.to_json_dict())
    np.testing.assert_allclose(restored.factors, truth.factors)
    np.testing.assert_allclose(restored.coefficients, truth.coefficients)


def test_config_validation():
    with pytest.raises(ValidationError):
        SimulationConfig(n=1)
    with pytest.raises(ValidationError):
        SimulationConfig(eta_variance=-1.0)
    with pytest.raises(ValidationError):
        SimulationConfig(zeta_support=(0.9, 0.1))
    cell = SimulationConfig(seed=11).for_cell(50, 5, reps=3)
    assert (cell.n, cell.t, cell.reps, cell.seed) == (50, 5, 3, 11)


def truth_estimator(data, truth):
    return truth.coefficients


def noisy_estimator(data, truth):
    rng = np.random.default_rng(1000 + truth.rep_index)
    return truth.coefficients + rng.normal(scale=0.01, size=3)


def test_exact_stub_has_no_bias():
    report = run_monte_carlo(grid_configs(SimulationConfig(), [(20, 5), (30, 5)], reps=10), truth_estimator)
    for cell in report.cells:
        assert cell.valid and cell.failures == 0
        np.testing.assert_allclose(cell.bias, 0.0, atol=1e-15)
        np.testing.assert_allclose(cell.rmse, 0.0, atol=1e-15)


def test_noisy_stub_calibrates_rmse():
    report = run_monte_carlo(grid_configs(SimulationConfig(), [(10, 4)], reps=2000), noisy_estimator)
    cell = report.cells[0]
    standard_error = 0.01 / np.sqrt(2000)
    assert np.all(np.abs(cell.bias) < 3 * standard_error)
    np.testing.assert_allclose(cell.rmse, 0.01, rtol=0.05)
    assert all(r >= abs(b) for r, b in zip(cell.rmse, cell.bias))


def test_failures_mark_cell_invalid():
    def flaky(data, truth):
        if truth.rep_index % 5 == 0:
            raise NonConvergence("stub")
        return truth.coefficients

    cell = MonteCarloRunner(flaky).run_cell(SimulationConfig(n=10, t=4, reps=10))
    assert cell.failures == 2
    assert cell.failure_rate == 0.2
    assert not cell.valid

    cell = MonteCarloRunner(flaky).run_cell(SimulationConfig(n=10, t=4, reps=5, seed=1))
    assert cell.failures == 1 and not cell.valid


def test_rare_failures_keep_cell_valid():
    def flaky(data, truth):
        if truth.rep_index == 0:
            raise NonConvergence("stub")
        return truth.coefficients

    cell = MonteCarloRunner(flaky).run_cell(SimulationConfig(n=10, t=4, reps=20))
    assert cell.failures == 1
    assert cell.valid


def test_replication_records_error():
    def broken(data, truth):
        raise DimensionMismatch("bad shape")

    outcome = run_replication(SimulationConfig(n=10, t=4), 0, broken)
    assert outcome.failed
    assert "DimensionMismatch" in outcome.error


def test_cell_rejects_rmse_below_bias():
    with pytest.raises(ValidationError):
        McCell(n=10, t=4, reps=1, bias=[0.5], rmse=[0.1])
    McCell(n=10, t=4, reps=1, bias=[0.5], rmse=[0.5 * (1 - 1e-15)])


def test_rmse_is_the_raw_root_mean_square():
    def offset(data, truth):
        shift = 0.3 if truth.rep_index % 2 == 0 else -0.1
        return truth.coefficients + shift

    cell = MonteCarloRunner(offset).run_cell(SimulationConfig(n=10, t=4, reps=10))
    np.testing.assert_allclose(cell.bias, 0.1, atol=1e-12)
    np.testing.assert_allclose(cell.rmse, np.sqrt(0.05), atol=1e-12)

    constant = MonteCarloRunner(lambda data, truth: truth.coefficients + 0.1).run_cell(
        SimulationConfig(n=10, t=4, reps=7)
    )
    np.testing.assert_allclose(constant.rmse, np.abs(constant.bias), rtol=1e-12)


def test_parallel_matches_serial():
    configs = grid_configs(SimulationConfig(seed=5), [(40, 5)], reps=4)
    estimator = PipelineReplicationEstimator(DmdfmConfig(r_override=2))
    serial = MonteCarloRunner(estimator, jobs=1, keep_estimates=True).run(configs)
    parallel = MonteCarloRunner(estimator, jobs=2, keep_estimates=True).run(configs)
    assert serial.model_dump() == parallel.model_dump()


def test_forecast_experiment_layout():
    config = SimulationConfig(n=60, t=6, seed=2)
    table = run_forecast_experiment(config, horizon=1)
    assert table.horizon == 1
    assert len(table.rows) == 61
    assert table.rows[-1].individual == AVERAGE_LABEL
    assert table.rows[0].period == 6
    assert len(table.sampled_individuals) == 6
    assert table.average_correlation is None
    assert table.mae >= 0

    again = run_forecast_experiment(config, horizon=1)
    assert again.sampled_individuals == table.sampled_individuals


def test_forecast_experiment_is_exact_without_noise():
    config = SimulationConfig(n=60, t=6, seed=9).noiseless()
    table = run_forecast_experiment(config, horizon=5, pipeline_config=DmdfmConfig(r_override=2))
    for row in table.rows:
        assert row.y_pred == pytest.approx(row.y_true, abs=1e-6)
    assert table.mae < 1e-6


def test_forecast_experiment_needs_horizon():
    with pytest.raises(DimensionMismatch):
        run_forecast_experiment(SimulationConfig(n=20, t=5), horizon=0)


@pytest.mark.slow
def test_desk_table_factor_bias():
    report = run_monte_carlo(grid_configs(SimulationConfig(), DESK_CELLS, reps=200), jobs=4)
    for cell in report.cells:
        assert cell.valid
        for b, r in zip(cell.bias, cell.rmse):
            assert r ** 2 >= b ** 2 - 1e-12
        if cell.n >= 100:
            assert abs(cell.bias[1]) < 0.05
            assert abs(cell.bias[2]) < 0.05


@pytest.mark.slow
def test_estimates_tighten_as_n_grows():
    config = SimulationConfig(seed=2024)
    report = MonteCarloRunner(jobs=4, keep_estimates=True).run(grid_configs(config, [(20, 5), (200, 5)], reps=200))
    small, large = report.cell(20, 5), report.cell(200, 5)
    assert small.valid and large.valid
    truth = config.true_coefficients
    small_error = np.median(np.abs(np.array(small.estimates) - truth), axis=0)
    large_error = np.median(np.abs(np.array(large.estimates) - truth), axis=0)
    assert np.all(large_error < small_error)
    assert all(big < little for big, little in zip(large.rmse, small.rmse))


@pytest.mark.slow
def test_forecast_error_is_within_twice_the_noise_scale():
    ratios = []
    for seed in range(20):
        config = SimulationConfig(n=100, t=10, seed=seed)
        table = run_forecast_experiment(config, horizon=20)
        _, truth = generate_panel(config.for_cell(100, 30))
        noise_sd = np.sqrt(config.eta_variance / (1.0 - truth.rho_eps ** 2))
        ratios.append(table.mae / noise_sd)
    assert np.median(ratios) < 2.0


@pytest.mark.slow
def test_average_forecast_tracks_truth():
    correlations = [
        run_forecast_experiment(SimulationConfig(n=100, t=10, seed=seed), horizon=20).average_correlation
        for seed in range(20)
    ]
    assert np.median([c for c in correlations if c is not None]) > 0.8
