import numpy as np
import pytest
from pydantic import ValidationError
from src.panel_core import PanelDataset
from src.factor_decomp import pca
from src.dmdfm_pipeline import (
    DmdfmConfig,
    DmdfmEstimator,
    DmdfmForecaster,
    GExtrapolation,
    OuterStop,
    estimate,
    forecast,
    residual_diagnostics,
)
from src.simulation import SimulationConfig, generate_panel, implied_factor_coefficients
from src.errors import MissingFutureRegressors, TooFewPeriods


def simulated(seed=0, n=100, t=6, noiseless=False):
    config = SimulationConfig(n=n, t=t, seed=seed)
    if noiseless:
        config = config.noiseless()
    return generate_panel(config, rep_index=0)


def test_noiseless_recovery_across_seeds():
    config = DmdfmConfig(r_override=2, s_override=0)
    for seed in range(20):
        data, truth = simulated(seed, noiseless=True)
        fit = estimate(data, config)
        np.testing.assert_allclose(implied_factor_coefficients(fit, truth), [0.6, 0.8, 1.0], atol=1e-4)


def test_fit_reconstructs_y():
    data, _ = simulated(1)
    fit = estimate(data)
    np.testing.assert_allclose(fit.fitted + fit.residuals, data.y[:, 1:], atol=1e-10)
    assert fit.fitted.shape == (100, 5)
    assert fit.interactive_term.shape == (100, 6)
    assert np.all(fit.interactive_term[:, 0] == 0)


def test_fitted_values_follow_the_model():
    data, _ = simulated(2)
    fit = estimate(data)
    scores = fit.regressor_scores()
    expected = (
        fit.beta_l * data.y[:, :-1]
        + scores[:, 1:, :] @ fit.beta_f
        + fit.individual_effects[:, None]
        + fit.interactive_term[:, 1:]
    )
    np.testing.assert_allclose(fit.fitted, expected, atol=1e-12)


def test_estimate_is_deterministic():
    data, _ = simulated(3)
    first = estimate(data)
    second = estimate(data)
    np.testing.assert_array_equal(first.coefficients, second.coefficients)
    np.testing.assert_array_equal(first.fitted, second.fitted)
    assert first.to_json_dict() == second.to_json_dict()


def test_regressor_scaling_leaves_fit_unchanged():
    data, _ = simulated(4)
    base = estimate(data)
    scaled = estimate(data.scaled_regressors(7.5))
    assert scaled.beta_l == pytest.approx(base.beta_l, abs=1e-8)
    np.testing.assert_allclose(scaled.fitted, base.fitted, atol=1e-7)
    np.testing.assert_allclose(
        scaled.regressor_scores() @ scaled.beta_f,
        base.regressor_scores() @ base.beta_f,
        atol=1e-7,
    )


def test_static_factor_regression_matches_least_squares():
    rng = np.random.default_rng(5)
    n, t = 80, 6
    x = rng.normal(size=(n, t, 2)) @ rng.normal(size=(5, 2)).T + 0.3 * rng.normal(size=(n, t, 5))
    scores = pca(x.reshape(-1, 5), 2).scores.reshape(n, t, 2)
    y = rng.normal(size=n)[:, None] + scores @ np.array([1.5, -0.7])
    data = PanelDataset(y=y, x=x)

    fit = estimate(data, DmdfmConfig(r_override=2, s_override=0, include_lag=False))

    demeaned_y = (y - y.mean(axis=1, keepdims=True)).reshape(-1)
    demeaned_f = (scores - scores.mean(axis=1, keepdims=True)).reshape(-1, 2)
    direct, *_ = np.linalg.lstsq(demeaned_f, demeaned_y, rcond=None)
    assert fit.beta_l == 0.0
    np.testing.assert_allclose(fit.beta_f, direct, atol=1e-6)


def test_zero_error_factors_converge_immediately():
    data, _ = simulated(6)
    fit = estimate(data, DmdfmConfig(s_override=0))
    assert fit.s == 0
    assert fit.converged
    assert fit.iterations == 1
    assert fit.coefficient_changes == [0.0]


def test_outer_iteration_objective_never_rises():
    for seed in range(10):
        data, _ = simulated(seed)
        fit = estimate(data, DmdfmConfig(s_override=2))
        trace = np.array(fit.objective_trace)
        tol = fit.config.convergence_tol
        assert len(fit.objective_trace) == fit.iterations == len(fit.coefficient_changes)
        assert np.all(trace[1:] <= trace[:-1] * (1 + tol) + tol)
        assert fit.s_report is None


def test_error_factor_fits_mostly_converge():
    fits = [estimate(simulated(seed)[0], DmdfmConfig(s_override=2)) for seed in range(10)]
    assert sum(fit.converged for fit in fits) >= 8
    for fit in fits:
        assert fit.converged == (fit.stop_reason != OuterStop.ITERATION_CAP)
        if fit.stop_reason == OuterStop.COEFFICIENTS_SETTLED:
            assert fit.coefficient_changes[-1] < fit.config.convergence_tol


def test_iteration_cap_is_respected():
    data, _ = simulated(7)
    fit = estimate(data, DmdfmConfig(s_override=1, max_outer_iterations=3))
    assert 1 <= fit.iterations <= 3
    if fit.iterations == 3 and fit.coefficient_changes[-1] >= fit.config.convergence_tol:
        assert not fit.converged
        assert fit.stop_reason == OuterStop.ITERATION_CAP


def test_outer_rounds_share_the_first_stage_weight():
    data, _ = simulated(11)
    fit = estimate(data, DmdfmConfig(s_override=2))
    np.testing.assert_array_equal(fit.second_stage.weight_used, fit.first_stage.weight_used)
    assert fit.second_stage.objective_value == pytest.approx(fit.objective_trace[-1], rel=1e-9)
    assert fit.to_json_dict()["stop_reason"] == fit.stop_reason.value


def test_selection_reports_are_kept():
    data, _ = simulated(8)
    fit = estimate(data)
    assert fit.r_report is not None and fit.r_report.chosen_k == fit.r
    assert fit.s_report is not None and fit.s_report.chosen_k == fit.s
    payload = fit.to_json_dict()
    assert payload["r"] == fit.r and payload["s"] == fit.s
    assert set(payload["coefficients"]) == set(fit.coefficient_names())


def test_needs_four_periods():
    rng = np.random.default_rng(9)
    data = PanelDataset(y=rng.normal(size=(10, 3)), x=rng.normal(size=(10, 3, 2)))
    with pytest.raises(TooFewPeriods):
        estimate(data)


def test_config_validation():
    with pytest.raises(ValidationError):
        DmdfmConfig(variance_threshold=0.0)
    with pytest.raises(ValidationError):
        DmdfmConfig(convergence_tol=0.0)
    with pytest.raises(ValidationError):
        DmdfmConfig(s_criterion="scree")
    assert DmdfmConfig().lag_depth_for(8) is None
    assert DmdfmConfig().lag_depth_for(9) == 4
    assert DmdfmConfig(max_lag_depth=None).lag_depth_for(30) is None
    assert DmdfmConfig(max_lag_depth=2).lag_depth_for(5) == 2


def test_one_step_forecast_formula():
    data, _ = simulated(10)
    fit = estimate(data)
    future_x = np.random.default_rng(10).normal(size=(100, 1, data.n_regressors))
    predicted = forecast(fit, data, 1, future_x)

    forecaster = DmdfmForecaster(fit)
    scores = forecaster.future_scores(future_x)[:, 0, :]
    interactive = fit.error_factors.loadings @ fit.error_factors.scores[-1] if fit.s else 0.0
    expected = fit.beta_l * data.y[:, -1] + scores @ fit.beta_f + fit.individual_effects + interactive
    np.testing.assert_allclose(predicted[:, 0], expected, atol=1e-12)


def test_forecast_is_recursive():
    data, _ = simulated(11)
    fit = estimate(data)
    future_x = np.random.default_rng(11).normal(size=(100, 3, data.n_regressors))
    predicted = forecast(fit, data, 3, future_x)
    step = DmdfmForecaster(fit).predict_step(predicted[:, 1], future_x[:, 2, :], step=3)
    np.testing.assert_allclose(predicted[:, 2], step, atol=1e-12)


def test_forecast_boundaries():
    data, _ = simulated(12)
    fit = estimate(data)
    assert forecast(fit, data, 0).shape == (100, 0)
    with pytest.raises(MissingFutureRegressors):
        forecast(fit, data, 2)
    with pytest.raises(MissingFutureRegressors):
        forecast(fit, data, 2, np.zeros((100, 1, data.n_regressors)))


def test_ar1_error_factor_extrapolation():
    data, _ = simulated(13)
    fit = estimate(data, DmdfmConfig(s_override=1, g_extrapolation=GExtrapolation.AR1))
    g = fit.error_factors.scores[:, 0]
    phi = (g[:-1] @ g[1:]) / (g[:-1] @ g[:-1])
    path = DmdfmForecaster(fit).error_factor_path(3)
    np.testing.assert_allclose(path[:, 0], g[-1] * phi ** np.arange(1, 4))

    held = estimate(data, DmdfmConfig(s_override=1))
    np.testing.assert_allclose(DmdfmForecaster(held).error_factor_path(2)[:, 0], held.error_factors.scores[-1, 0])


def test_diagnostics_on_zero_residuals():
    report = residual_diagnostics(np.zeros((10, 20)))
    assert np.all(report.means == 0)
    assert not report.mean_flags.any()
    assert not report.autocorrelation_flags.any()


def test_diagnostics_on_white_noise():
    rates = []
    for seed in range(20):
        residuals = np.random.default_rng(seed).normal(size=(100, 50))
        rates.append(residual_diagnostics(residuals).mean_flag_rate)
    assert 0.02 < np.mean(rates) < 0.09


def test_diagnostics_flag_autocorrelated_residuals():
    rng = np.random.default_rng(14)
    shocks = rng.normal(size=(100, 50))
    residuals = np.zeros_like(shocks)
    for t in range(1, 50):
        residuals[:, t] = 0.9 * residuals[:, t - 1] + shocks[:, t]
    assert residual_diagnostics(residuals).autocorrelation_flag_rate >= 0.95


def test_diagnostics_from_fit_use_config_threshold():
    data, _ = simulated(15)
    fit = DmdfmEstimator(DmdfmConfig(diagnostics_z=3.0)).estimate(data)
    report = residual_diagnostics(fit)
    assert report.z == 3.0
    assert report.means.shape == (100,)
