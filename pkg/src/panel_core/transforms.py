import numpy as np
from .models import LaggedView, PanelDataset
from src.errors import DimensionMismatch, LagTooLarge


def lag_view(data: PanelDataset, h: int = 1) -> LaggedView:
    """Align y_t with its h lags; y_lagged[i, t, j] = y[i, t + h - 1 - j]."""
    t = data.n_periods
    if h < 1 or h > t - 2:
        raise LagTooLarge(f"lag order must lie in [1, {t - 2}] for T={t}, got {h}")

    y = data.y
    width = t - h
    lagged = np.stack([y[:, h - 1 - j: h - 1 - j + width] for j in range(h)], axis=2)

    return LaggedView(lag_order=h, y_current=y[:, h:], y_lagged=lagged)


def first_difference(series: np.ndarray) -> np.ndarray:
    """Difference along the period axis (axis 1); works for N x T and N x T x k arrays."""
    series = np.asarray(series, dtype=float)
    if series.ndim < 2 or series.shape[1] < 2:
        raise DimensionMismatch(f"need at least 2 periods to difference, got shape {series.shape}")
    return series[:, 1:] - series[:, :-1]
