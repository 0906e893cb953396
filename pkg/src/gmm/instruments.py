import logging
from typing import Optional
import numpy as np
from src.panel_core.models import PanelDataset, frozen_array
from src.errors import DimensionMismatch, TooFewPeriods
from .models import FInstrumentMode, GmmProblem, WeightPattern

logger = logging.getLogger(__name__)


def build_instruments(
    data: PanelDataset,
    f_scores: np.ndarray,
    max_lag_depth: Optional[int] = None,
    f_instruments: FInstrumentMode = FInstrumentMode.ALL_PERIODS,
    weight_pattern: WeightPattern = WeightPattern.FIRST_DIFFERENCE,
    include_lag: bool = True,
    absorbed: Optional[np.ndarray] = None,
) -> GmmProblem:
    """Differences the model and stacks the block-diagonal instrument matrices.

    Periods are columns 0..T-1 of data.y. Differenced equations run over
    t = 2..T-1. The block for t holds the lagged levels y_0..y_{t-2}
    (the most recent max_lag_depth of them when capped) followed by the
    factor scores of periods 1..T-1, or dF_t alone in contemporaneous mode.
    """
    n, t_total = data.n_individuals, data.n_periods
    if t_total < 3:
        raise TooFewPeriods(f"GMM needs at least 3 periods, got {t_total}")

    f_scores = np.asarray(f_scores, dtype=float)
    if f_scores.ndim != 3 or f_scores.shape[:2] != (n, t_total):
        raise DimensionMismatch(
            f"factor scores must be {n} x {t_total} x r, got {f_scores.shape}"
        )
    if max_lag_depth is not None and max_lag_depth < 1:
        raise DimensionMismatch("max_lag_depth must be at least 1")

    y = np.asarray(data.y, dtype=float)
    y_adj = y if absorbed is None else y - np.asarray(absorbed, dtype=float)
    if y_adj.shape != y.shape:
        raise DimensionMismatch("absorbed term must have the shape of y")

    r = f_scores.shape[2]
    base_periods = t_total - 1
    periods = range(2, t_total)

    dy = _differenced(y_adj)
    dy_lag = np.stack([y[:, t - 1] - y[:, t - 2] for t in periods], axis=1)
    df = np.stack([f_scores[:, t, :] - f_scores[:, t - 1, :] for t in periods], axis=1)

    level_ranges = []
    for t in periods:
        start = 0 if max_lag_depth is None else max(0, t - 1 - max_lag_depth)
        level_ranges.append((start, t - 1))

    f_rows = r * base_periods if f_instruments == FInstrumentMode.ALL_PERIODS else r
    block_sizes = [(stop - start) + f_rows for start, stop in level_ranges]
    moment_count = sum(block_sizes)

    z = np.zeros((n, moment_count, len(level_ranges)))
    f_levels = f_scores[:, 1:, :].reshape(n, -1)
    offset = 0
    for b, (start, stop) in enumerate(level_ranges):
        width = stop - start
        z[:, offset:offset + width, b] = y[:, start:stop]
        offset += width
        if f_rows:
            if f_instruments == FInstrumentMode.ALL_PERIODS:
                z[:, offset:offset + f_rows, b] = f_levels
            else:
                z[:, offset:offset + f_rows, b] = df[:, b, :]
            offset += f_rows

    logger.debug(
        "Built %d moments over %d differenced periods (r=%d, depth=%s)",
        moment_count, len(level_ranges), r, max_lag_depth,
    )

    return GmmProblem(
        dy=dy,
        dy_lag=dy_lag,
        df=df,
        instruments=z,
        moment_count=moment_count,
        base_periods=base_periods,
        block_sizes=block_sizes,
        include_lag=include_lag,
        weight_pattern=weight_pattern,
        f_instruments=f_instruments,
        max_lag_depth=max_lag_depth,
    )


def expected_moment_count(base_periods: int, n_factors: int) -> int:
    """Uncapped instrument count for a panel whose differenced periods run over 2..base_periods."""
    return base_periods * (base_periods - 1) // 2 + n_factors * base_periods * (base_periods - 1)


def absorb(problem: GmmProblem, data: PanelDataset, absorbed: np.ndarray) -> GmmProblem:
    """Same instruments and regressors, dependent side rebuilt from y minus the absorbed term."""
    y = np.asarray(data.y, dtype=float)
    absorbed = np.asarray(absorbed, dtype=float)
    if absorbed.shape != y.shape:
        raise DimensionMismatch("absorbed term must have the shape of y")
    dy = _differenced(y - absorbed)
    if dy.shape != problem.dy.shape:
        raise DimensionMismatch("panel does not match the prepared GMM problem")
    return problem.model_copy(update={"dy": frozen_array(dy, ndim=2)})


def _differenced(y: np.ndarray) -> np.ndarray:
    return np.stack([y[:, t] - y[:, t - 1] for t in range(2, y.shape[1])], axis=1)
