import logging
from typing import Optional
import numpy as np
from src.panel_core.models import PanelDataset
from src.factor_decomp import factor_scores
from src.errors import DimensionMismatch, MissingFutureRegressors
from .models import DmdfmFit, GExtrapolation

logger = logging.getLogger(__name__)


class DmdfmForecaster:
    """Step-by-step forecasts from a fitted model.

    Future regressor-factor scores come from the supplied future X rows.
    Future error factors are held at their last estimate, or extrapolated
    with a per-factor AR(1) when configured.
    """

    def __init__(self, fit: DmdfmFit):
        self.fit = fit

    def error_factor_path(self, horizon: int) -> np.ndarray:
        """G for the `horizon` periods after the sample, horizon x s."""
        g = self.fit.error_factors.scores
        s = g.shape[1]
        if s == 0 or horizon == 0:
            return np.zeros((horizon, s))
        last = g[-1]
        if self.fit.config.g_extrapolation == GExtrapolation.HOLD_LAST or g.shape[0] < 2:
            return np.tile(last, (horizon, 1))

        lagged, current = g[:-1], g[1:]
        denom = (lagged ** 2).sum(axis=0)
        phi = np.divide(
            (lagged * current).sum(axis=0), denom, out=np.zeros(s), where=denom > 0
        )
        steps = np.arange(1, horizon + 1)[:, None]
        return (phi[None, :] ** steps) * last[None, :]

    def future_scores(self, future_x: np.ndarray) -> np.ndarray:
        """Regressor-factor scores for N x h x p future rows, N x h x r."""
        n, h, p = future_x.shape
        scores = factor_scores(self.fit.regressor_factors, future_x.reshape(-1, p))
        return scores.reshape(n, h, self.fit.r)

    def predict_step(self, y_last: np.ndarray, x_next: np.ndarray, step: int = 1) -> np.ndarray:
        """One-step prediction for every individual given last y (N,) and next X (N x p)."""
        fit = self.fit
        x_next = np.asarray(x_next, dtype=float)
        scores = factor_scores(fit.regressor_factors, x_next)
        g = self.error_factor_path(step)
        interactive = fit.error_factors.loadings @ g[-1] if fit.s else 0.0
        return (
            fit.beta_l * np.asarray(y_last, dtype=float)
            + scores @ fit.beta_f
            + fit.individual_effects
            + interactive
        )

    def forecast(self, data: PanelDataset, horizon: int, future_x: Optional[np.ndarray] = None) -> np.ndarray:
        fit = self.fit
        n = data.n_individuals
        if horizon < 0:
            raise DimensionMismatch("horizon cannot be negative")
        if horizon == 0:
            return np.zeros((n, 0))
        if n != fit.n_individuals:
            raise DimensionMismatch(
                f"panel has {n} individuals, the fit has {fit.n_individuals}"
            )
        if future_x is None:
            raise MissingFutureRegressors(f"forecasting {horizon} periods needs future regressor rows")
        future_x = np.asarray(future_x, dtype=float)
        if future_x.ndim != 3 or future_x.shape[0] != n or future_x.shape[2] != data.n_regressors:
            raise DimensionMismatch(
                f"future regressors must be {n} x h x {data.n_regressors}, got {future_x.shape}"
            )
        if future_x.shape[1] < horizon:
            raise MissingFutureRegressors(
                f"horizon {horizon} exceeds the {future_x.shape[1]} supplied future periods"
            )

        scores = self.future_scores(future_x[:, :horizon, :])
        g = self.error_factor_path(horizon)
        interactive = g @ fit.error_factors.loadings.T if fit.s else np.zeros((horizon, n))

        predictions = np.empty((n, horizon))
        y_prev = np.array(data.y[:, -1])
        for step in range(horizon):
            y_next = (
                fit.beta_l * y_prev
                + scores[:, step, :] @ fit.beta_f
                + fit.individual_effects
                + interactive[step]
            )
            predictions[:, step] = y_next
            y_prev = y_next

        logger.debug("Forecast %d periods for %d individuals", horizon, n)
        return predictions


def forecast(fit: DmdfmFit, data: PanelDataset, horizon: int, future_x: Optional[np.ndarray] = None) -> np.ndarray:
    return DmdfmForecaster(fit).forecast(data, horizon, future_x)
