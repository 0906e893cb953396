import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, List, Optional, Sequence, Tuple
import numpy as np
from src.panel_core.models import PanelDataset
from src.dmdfm_pipeline import DmdfmConfig, DmdfmEstimator
from src.errors import DmdfmError, NonConvergence
from .dgp import generate_panel, implied_factor_coefficients
from .models import (
    FAILURE_LIMIT,
    McCell,
    McReport,
    ReplicationOutcome,
    SimulationConfig,
    SimulationTruth,
)

logger = logging.getLogger(__name__)

ReplicationEstimator = Callable[[PanelDataset, SimulationTruth], np.ndarray]


class PipelineReplicationEstimator:
    """Fits the pipeline and reports (beta_l, beta_f1, beta_f2) on the true-factor scale."""

    def __init__(self, config: Optional[DmdfmConfig] = None):
        self.config = config or DmdfmConfig()

    def __call__(self, data: PanelDataset, truth: SimulationTruth) -> np.ndarray:
        fit = DmdfmEstimator(self.config).estimate(data)
        if not fit.converged:
            raise NonConvergence(f"outer iteration did not converge in {fit.iterations} rounds")
        return implied_factor_coefficients(fit, truth)


def run_replication(
    config: SimulationConfig,
    rep_index: int,
    estimator: ReplicationEstimator,
) -> ReplicationOutcome:
    data, truth = generate_panel(config, rep_index)
    try:
        estimate = np.asarray(estimator(data, truth), dtype=float)
    except (DmdfmError, np.linalg.LinAlgError) as exc:
        logger.debug("Replication %d (N=%d, T=%d) failed: %s", rep_index, config.n, config.t, exc)
        return ReplicationOutcome(rep_index=rep_index, error=f"{type(exc).__name__}: {exc}")
    return ReplicationOutcome(rep_index=rep_index, estimate=estimate)


def _replicate(task: Tuple[SimulationConfig, int, ReplicationEstimator]) -> ReplicationOutcome:
    config, rep_index, estimator = task
    return run_replication(config, rep_index, estimator)


def summarize_cell(
    config: SimulationConfig,
    outcomes: Sequence[ReplicationOutcome],
    keep_estimates: bool = False,
) -> McCell:
    ordered = sorted(outcomes, key=lambda o: o.rep_index)
    successes = [o.estimate for o in ordered if not o.failed]
    failures = len(ordered) - len(successes)
    truth = config.true_coefficients

    if successes:
        errors = np.stack(successes) - truth
        bias = errors.mean(axis=0)
        rmse = np.sqrt((errors ** 2).mean(axis=0))
    else:
        bias = rmse = np.full(truth.shape[0], np.nan)

    valid = bool(successes) and failures <= FAILURE_LIMIT * len(ordered)
    if not valid:
        logger.warning(
            "Cell (N=%d, T=%d) is invalid: %d of %d replications failed",
            config.n, config.t, failures, len(ordered),
        )

    return McCell(
        n=config.n,
        t=config.t,
        reps=len(ordered),
        failures=failures,
        bias=bias.tolist(),
        rmse=rmse.tolist(),
        valid=valid,
        estimates=[e.tolist() for e in successes] if keep_estimates else None,
    )


class MonteCarloRunner:
    """Replicates each (N, T) cell and aggregates bias and RMSE in rep_index order."""

    def __init__(
        self,
        estimator: Optional[ReplicationEstimator] = None,
        jobs: int = 1,
        keep_estimates: bool = False,
    ):
        self.estimator = estimator or PipelineReplicationEstimator()
        self.jobs = max(1, jobs)
        self.keep_estimates = keep_estimates

    def run_cell(self, config: SimulationConfig) -> McCell:
        tasks = [(config, rep, self.estimator) for rep in range(config.reps)]
        if self.jobs == 1:
            outcomes = [_replicate(task) for task in tasks]
        else:
            with ProcessPoolExecutor(max_workers=self.jobs) as pool:
                outcomes = list(pool.map(_replicate, tasks, chunksize=max(1, len(tasks) // (4 * self.jobs))))
        cell = summarize_cell(config, outcomes, self.keep_estimates)
        logger.info(
            "Cell (N=%d, T=%d): %d reps, %d failures", cell.n, cell.t, cell.reps, cell.failures
        )
        return cell

    def run(self, configs: Sequence[SimulationConfig]) -> McReport:
        cells: List[McCell] = [self.run_cell(config) for config in configs]
        seed = configs[0].seed if configs else 0
        return McReport(cells=cells, seed=seed)


def run_monte_carlo(
    configs: Sequence[SimulationConfig],
    estimator: Optional[ReplicationEstimator] = None,
    jobs: int = 1,
    keep_estimates: bool = False,
) -> McReport:
    return MonteCarloRunner(estimator, jobs, keep_estimates).run(configs)


def grid_configs(base: SimulationConfig, cells: Sequence[Tuple[int, int]], reps: Optional[int] = None) -> List[SimulationConfig]:
    return [base.for_cell(n, t, reps) for n, t in cells]
