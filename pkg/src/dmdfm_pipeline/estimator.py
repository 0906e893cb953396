import logging
from typing import Optional, Tuple
import numpy as np
from src.panel_core.models import PanelDataset
from src.factor_decomp import pca, select_r_regressors, select_s_errors
from src.factor_decomp.models import FactorDecomposition, SelectionReport
from src.gmm import GmmEstimator, GmmProblem, GmmSteps, WeightKind, WeightMatrix, absorb, build_instruments
from src.gmm.models import GmmEstimate
from src.errors import KTooLarge, TooFewPeriods
from .models import DmdfmConfig, DmdfmFit, OuterStop

logger = logging.getLogger(__name__)


class DmdfmEstimator:
    """Four-step estimation: PCA of X, first-stage GMM, PCA of the stage-one
    residuals, second-stage GMM with the interactive term absorbed.

    Steps two to four repeat against the first-stage weight, which stays
    fixed so that every round minimises the same quadratic form. A round
    that would raise the objective is rejected and the loop stops there.
    """

    def __init__(self, config: Optional[DmdfmConfig] = None):
        self.config = config or DmdfmConfig()

    def estimate(self, data: PanelDataset) -> DmdfmFit:
        config = self.config
        n, t_total = data.n_individuals, data.n_periods
        if t_total < 4:
            raise TooFewPeriods(f"estimation needs at least 4 periods, got {t_total}")

        regressor_factors, r_report = self._regressor_factors(data)
        scores = regressor_factors.scores.reshape(n, t_total, regressor_factors.n_factors)
        problem = build_instruments(
            data,
            scores,
            max_lag_depth=config.lag_depth_for(t_total),
            f_instruments=config.f_instruments,
            weight_pattern=config.weight_pattern,
            include_lag=config.include_lag,
        )
        first_stage = self._first_stage(problem)
        weight = first_stage.weight_used
        coefficients = first_stage.coefficients
        accepted = problem

        s_report: Optional[SelectionReport] = None
        s: Optional[int] = config.s_override
        objective_trace = []
        changes = []
        stop = OuterStop.ITERATION_CAP

        for iteration in range(1, config.max_outer_iterations + 1):
            residual_u = self._stage_one_residuals(data, scores, coefficients, config.include_lag)
            if s is None:
                kmax = min(config.kmax_s, n, t_total - 1)
                s_report = select_s_errors(residual_u, kmax, config.s_criterion)
                s = s_report.chosen_k
                logger.info("Selected s=%d error factors", s)
            absorbed = _interactive_term(self._error_factors(residual_u, s), n)

            candidate = absorb(problem, data, absorbed)
            updated, _, _ = GmmEstimator.solve_coefficients(candidate, weight)
            objective = GmmEstimator.objective(
                candidate, weight, GmmEstimator.residuals_at(candidate, updated)
            )
            change = float(np.max(np.abs(updated - coefficients)))

            if objective_trace and objective > objective_trace[-1] * (1 + config.convergence_tol) + config.convergence_tol:
                logger.info(
                    "GMM objective would rise from %.6g to %.6g at outer iteration %d; keeping round %d",
                    objective_trace[-1], objective, iteration, iteration - 1,
                )
                stop = OuterStop.OBJECTIVE_ROSE
                break

            objective_trace.append(objective)
            changes.append(change)
            coefficients = updated
            accepted = candidate
            logger.debug("Outer iteration %d: max coefficient change %.3e", iteration, change)
            if change < config.convergence_tol:
                stop = OuterStop.COEFFICIENTS_SETTLED
                break

        if stop == OuterStop.ITERATION_CAP:
            logger.warning(
                "Outer iteration stopped after %d rounds without convergence (last change %.3e)",
                len(changes), changes[-1],
            )
        second_stage = self._second_stage(accepted, first_stage)

        # final decomposition consistent with the reported coefficients
        residual_u = self._stage_one_residuals(data, scores, second_stage.coefficients, config.include_lag)
        error_factors = self._error_factors(residual_u, s)
        interactive = _interactive_term(error_factors, n)

        beta_l, beta_f = _split(second_stage)
        individual_effects = error_factors.means
        fitted = (
            beta_l * data.y[:, :-1]
            + scores[:, 1:, :] @ beta_f
            + individual_effects[:, None]
            + interactive[:, 1:]
        )
        residuals = data.y[:, 1:] - fitted

        return DmdfmFit(
            config=config,
            regressor_factors=regressor_factors,
            error_factors=error_factors,
            beta_l=beta_l,
            beta_f=beta_f,
            individual_effects=individual_effects,
            interactive_term=interactive,
            fitted=fitted,
            residuals=residuals,
            first_stage=first_stage,
            second_stage=second_stage,
            r_report=r_report,
            s_report=s_report,
            objective_trace=objective_trace,
            coefficient_changes=changes,
            iterations=len(changes),
            converged=stop != OuterStop.ITERATION_CAP,
            stop_reason=stop,
        )

    def _regressor_factors(self, data: PanelDataset) -> Tuple[FactorDecomposition, Optional[SelectionReport]]:
        config = self.config
        p = data.n_regressors
        report = None
        if config.r_override is not None:
            r = config.r_override
            if r > p:
                raise KTooLarge(f"r_override={r} exceeds the {p} regressors")
        else:
            report = select_r_regressors(
                data,
                config.variance_threshold,
                min(config.kmax_r, p),
                scope=config.r_scope,
                criterion=config.r_criterion,
            )
            r = report.chosen_k
            logger.info("Selected r=%d regressor factors", r)
        return pca(data.x.reshape(-1, p), r), report

    def _first_stage(self, problem: GmmProblem) -> GmmEstimate:
        if self.config.gmm_steps == GmmSteps.ONE:
            return GmmEstimator.one_step(problem)
        return GmmEstimator.two_step(problem)

    def _second_stage(self, problem: GmmProblem, first_stage: GmmEstimate) -> GmmEstimate:
        """Full estimate (residuals, sandwich variance) at the accepted round under the held weight."""
        two_step = self.config.gmm_steps == GmmSteps.TWO and not first_stage.second_step_degenerate
        weight = WeightMatrix(
            matrix=first_stage.weight_used,
            kind=WeightKind.TWO_STEP if two_step else WeightKind.ONE_STEP,
            regularized=first_stage.weight_regularized,
        )
        return GmmEstimator.gmm_solve(problem, weight).model_copy(update={
            "first_step_objective": first_stage.first_step_objective,
            "second_step_degenerate": first_stage.second_step_degenerate,
        })

    @staticmethod
    def _stage_one_residuals(
        data: PanelDataset, scores: np.ndarray, coefficients: np.ndarray, include_lag: bool
    ) -> np.ndarray:
        """u_it = y_it - beta_l * y_i,t-1 - F_it beta_f for t >= 1."""
        beta_l, beta_f = (coefficients[0], coefficients[1:]) if include_lag else (0.0, coefficients)
        return data.y[:, 1:] - beta_l * data.y[:, :-1] - scores[:, 1:, :] @ beta_f

    @staticmethod
    def _error_factors(residual_u: np.ndarray, s: int) -> FactorDecomposition:
        # rows are periods: loadings run over individuals, column means are the individual effects
        return pca(residual_u.T, s)


def _split(estimate: GmmEstimate) -> Tuple[float, np.ndarray]:
    return float(estimate.rho_hat), np.array(estimate.beta_f_hat)


def _interactive_term(error_factors: FactorDecomposition, n: int) -> np.ndarray:
    common = error_factors.common_component.T
    return np.concatenate([np.zeros((n, 1)), common], axis=1)


def estimate(data: PanelDataset, config: Optional[DmdfmConfig] = None) -> DmdfmFit:
    return DmdfmEstimator(config).estimate(data)
