from .models import (
    DESK_CELLS,
    DESK_REPS,
    FULL_CELLS,
    FULL_REPS,
    ForecastRow,
    ForecastTable,
    McCell,
    McReport,
    ReplicationOutcome,
    SimulationConfig,
    SimulationTruth,
)
from .dgp import PanelSimulator, generate_panel, implied_factor_coefficients
from .monte_carlo import (
    MonteCarloRunner,
    PipelineReplicationEstimator,
    grid_configs,
    run_monte_carlo,
    run_replication,
    summarize_cell,
)
from .forecast_experiment import AVERAGE_LABEL, run_forecast_experiment

__all__ = [
    "DESK_CELLS",
    "DESK_REPS",
    "FULL_CELLS",
    "FULL_REPS",
    "ForecastRow",
    "ForecastTable",
    "McCell",
    "McReport",
    "ReplicationOutcome",
    "SimulationConfig",
    "SimulationTruth",
    "PanelSimulator",
    "generate_panel",
    "implied_factor_coefficients",
    "MonteCarloRunner",
    "PipelineReplicationEstimator",
    "grid_configs",
    "run_monte_carlo",
    "run_replication",
    "summarize_cell",
    "AVERAGE_LABEL",
    "run_forecast_experiment",
]
