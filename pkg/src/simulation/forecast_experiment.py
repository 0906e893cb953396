import logging
from typing import List, Optional
import numpy as np
from src.dmdfm_pipeline import DmdfmConfig, DmdfmEstimator, DmdfmForecaster
from src.errors import DimensionMismatch
from .dgp import generate_panel, substream
from .models import ForecastRow, ForecastTable, SimulationConfig

logger = logging.getLogger(__name__)

AVERAGE_LABEL = "AVERAGE"
SAMPLE_SIZE = 6


def run_forecast_experiment(
    config: SimulationConfig,
    horizon: int = 20,
    pipeline_config: Optional[DmdfmConfig] = None,
    rep_index: int = 0,
    sample_size: int = SAMPLE_SIZE,
) -> ForecastTable:
    """Fit on the first config.t periods and roll one-step forecasts over the next `horizon`.

    Each forecast uses the observed y of the previous period and the observed
    regressors of the forecast period.
    """
    if horizon < 1:
        raise DimensionMismatch(f"horizon must be at least 1, got {horizon}")

    t_train = config.t
    full, _ = generate_panel(config.for_cell(config.n, t_train + horizon), rep_index)
    train = full.head_periods(t_train)
    fit = DmdfmEstimator(pipeline_config).estimate(train)
    forecaster = DmdfmForecaster(fit)

    predicted = np.empty((full.n_individuals, horizon))
    for step in range(horizon):
        period = t_train + step
        predicted[:, step] = forecaster.predict_step(
            full.y[:, period - 1], full.x[:, period, :], step=step + 1
        )
    actual = np.array(full.y[:, t_train:])

    rows: List[ForecastRow] = []
    for step in range(horizon):
        period = t_train + step
        for i, label in enumerate(full.individual_ids):
            rows.append(ForecastRow(
                period=period,
                individual=label,
                y_true=float(actual[i, step]),
                y_pred=float(predicted[i, step]),
            ))
        rows.append(ForecastRow(
            period=period,
            individual=AVERAGE_LABEL,
            y_true=float(actual[:, step].mean()),
            y_pred=float(predicted[:, step].mean()),
        ))

    rng = substream(config.seed, rep_index, "forecast_sample")
    picked = rng.choice(full.n_individuals, size=min(sample_size, full.n_individuals), replace=False)
    sampled = [full.individual_ids[i] for i in sorted(picked)]

    errors = predicted - actual
    nonzero = actual != 0
    mape = float(np.mean(np.abs(errors[nonzero] / actual[nonzero])) * 100) if nonzero.any() else 0.0

    table = ForecastTable(
        rows=rows,
        horizon=horizon,
        sampled_individuals=sampled,
        mae=float(np.mean(np.abs(errors))),
        mape=mape,
        average_correlation=_correlation(actual.mean(axis=0), predicted.mean(axis=0)),
    )
    logger.info("Forecast experiment: MAE %.4f, MAPE %.2f%%", table.mae, table.mape)
    return table


def _correlation(a: np.ndarray, b: np.ndarray) -> Optional[float]:
    if a.shape[0] < 2 or np.std(a) == 0 or np.std(b) == 0:
        return None
    return float(np.corrcoef(a, b)[0, 1])
