from .models import DmdfmConfig, DmdfmFit, GExtrapolation, OuterStop, ResidualDiagnostics
from .estimator import DmdfmEstimator, estimate
from .forecaster import DmdfmForecaster, forecast
from .diagnostics import residual_diagnostics

__all__ = [
    "DmdfmConfig",
    "DmdfmFit",
    "GExtrapolation",
    "OuterStop",
    "ResidualDiagnostics",
    "DmdfmEstimator",
    "estimate",
    "DmdfmForecaster",
    "forecast",
    "residual_diagnostics",
]
