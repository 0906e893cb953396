import logging
from typing import Tuple
import numpy as np
from scipy import linalg
from src.errors import RankDeficientDesign
from .models import GmmEstimate, GmmProblem, WeightKind, WeightMatrix

logger = logging.getLogger(__name__)

SINGULAR_TOLERANCE = 1e-10
MAX_CONDITION = 1e12
DEGENERATE_RESIDUAL = 1e-12


def _symmetrize(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.T)


def _invert_weight(matrix: np.ndarray, label: str) -> Tuple[np.ndarray, bool]:
    """Inverse of a symmetric moment covariance; Moore-Penrose when singular."""
    matrix = _symmetrize(matrix)
    eigenvalues = linalg.eigvalsh(matrix)
    top = float(np.max(np.abs(eigenvalues))) if eigenvalues.size else 0.0
    if top == 0.0 or eigenvalues.min() <= SINGULAR_TOLERANCE * top:
        logger.warning(
            "%s moment covariance is singular (min eigenvalue %.3e); using pseudo-inverse",
            label, eigenvalues.min() if eigenvalues.size else 0.0,
        )
        return _symmetrize(linalg.pinvh(matrix)), True
    return _symmetrize(linalg.inv(matrix)), False


class GmmEstimator:
    """Closed-form first-difference GMM over a prepared GmmProblem."""

    @staticmethod
    def moment_covariance(problem: GmmProblem) -> np.ndarray:
        """N^-1 sum_i Z_i U Z_i'."""
        z = problem.instruments
        zu = np.einsum("nlt,ts->nls", z, problem.u_matrix)
        return _symmetrize(np.einsum("nls,nms->lm", zu, z) / problem.n_individuals)

    @staticmethod
    def one_step_weight(problem: GmmProblem) -> WeightMatrix:
        matrix, regularized = _invert_weight(GmmEstimator.moment_covariance(problem), "One-step")
        return WeightMatrix(matrix=matrix, kind=WeightKind.ONE_STEP, regularized=regularized)

    @staticmethod
    def cross_moments(problem: GmmProblem) -> Tuple[np.ndarray, np.ndarray]:
        """(sum_i Z_i X_i, sum_i Z_i dy_i)."""
        z = problem.instruments
        zx = np.einsum("nlt,ntk->lk", z, problem.regressors)
        zy = np.einsum("nlt,nt->l", z, problem.dy)
        return zx, zy

    @staticmethod
    def objective(problem: GmmProblem, weight: np.ndarray, residuals: np.ndarray) -> float:
        """N * g' A g with g the mean sample moment N^-1 sum_i Z_i d_eps_i."""
        moment = np.einsum("nlt,nt->l", problem.instruments, residuals) / problem.n_individuals
        return float(problem.n_individuals * moment @ weight @ moment)

    @staticmethod
    def residuals_at(problem: GmmProblem, coefficients: np.ndarray) -> np.ndarray:
        return problem.dy - np.einsum("ntk,k->nt", problem.regressors, coefficients)

    @staticmethod
    def solve_coefficients(problem: GmmProblem, weight: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(coefficients, sum_i Z_i X_i, normal matrix) minimising the objective under a fixed weight."""
        if weight.shape != (problem.moment_count, problem.moment_count):
            raise RankDeficientDesign(
                f"weight is {weight.shape}, expected {problem.moment_count} square"
            )
        zx, zy = GmmEstimator.cross_moments(problem)
        normal = _symmetrize(zx.T @ weight @ zx)
        _check_condition(normal)
        return linalg.solve(normal, zx.T @ weight @ zy, assume_a="sym"), zx, normal

    @staticmethod
    def gmm_solve(problem: GmmProblem, weight: WeightMatrix) -> GmmEstimate:
        a = weight.matrix
        coefficients, zx, normal = GmmEstimator.solve_coefficients(problem, a)
        residuals = GmmEstimator.residuals_at(problem, coefficients)
        avar = GmmEstimator._sandwich(problem, a, zx, normal, residuals)

        rho, beta = (coefficients[0], coefficients[1:]) if problem.include_lag else (0.0, coefficients)
        return GmmEstimate(
            rho_hat=float(rho),
            beta_f_hat=beta,
            residuals=residuals,
            weight_used=a,
            avar=avar,
            objective_value=GmmEstimator.objective(problem, a, residuals),
            moment_count=problem.moment_count,
            include_lag=problem.include_lag,
            weight_regularized=weight.regularized,
        )

    @staticmethod
    def one_step(problem: GmmProblem) -> GmmEstimate:
        return GmmEstimator.gmm_solve(problem, GmmEstimator.one_step_weight(problem))

    @staticmethod
    def two_step(problem: GmmProblem) -> GmmEstimate:
        first_weight = GmmEstimator.one_step_weight(problem)
        first = GmmEstimator.gmm_solve(problem, first_weight)

        scale = float(np.linalg.norm(problem.dy))
        if float(np.linalg.norm(first.residuals)) <= DEGENERATE_RESIDUAL * max(scale, 1.0):
            logger.warning("First-step residuals vanish; keeping the one-step estimate")
            return _degenerate(first)

        moments = np.einsum("nlt,nt->nl", problem.instruments, first.residuals)
        covariance = moments.T @ moments / problem.n_individuals
        matrix, regularized = _invert_weight(covariance, "Two-step")
        second_weight = WeightMatrix(matrix=matrix, kind=WeightKind.TWO_STEP, regularized=regularized)

        try:
            second = GmmEstimator.gmm_solve(problem, second_weight)
        except RankDeficientDesign as exc:
            logger.warning("Second-step normal matrix is singular (%s); keeping the one-step estimate", exc)
            return _degenerate(first)

        return second.model_copy(update={
            "first_step_objective": first.objective_value,
            "weight_regularized": first_weight.regularized or regularized,
        })

    @staticmethod
    def asymptotic_variance(estimate: GmmEstimate, problem: GmmProblem) -> np.ndarray:
        a = estimate.weight_used
        zx, _ = GmmEstimator.cross_moments(problem)
        normal = _symmetrize(zx.T @ a @ zx)
        _check_condition(normal)
        return GmmEstimator._sandwich(problem, a, zx, normal, estimate.residuals)

    @staticmethod
    def _sandwich(problem, a, zx, normal, residuals) -> np.ndarray:
        # sigma^2 from differenced residuals: Var(d_eps) = 2 sigma^2
        sigma2 = float(np.sum(residuals ** 2)) / (2.0 * residuals.size)
        omega = sigma2 * problem.n_individuals * GmmEstimator.moment_covariance(problem)
        bread = linalg.inv(normal)
        meat = zx.T @ a @ omega @ a @ zx
        return _symmetrize(bread @ meat @ bread)


def _check_condition(normal: np.ndarray) -> None:
    diagonal = np.diag(normal)
    if normal.size == 0:
        raise RankDeficientDesign("no parameters to estimate", condition_number=float("inf"))
    if not np.all(np.isfinite(normal)) or np.any(diagonal <= 0):
        raise RankDeficientDesign("normal matrix has a null column", condition_number=float("inf"))
    scale = 1.0 / np.sqrt(diagonal)
    condition = float(np.linalg.cond(normal * np.outer(scale, scale)))
    if not np.isfinite(condition) or condition > MAX_CONDITION:
        raise RankDeficientDesign(
            f"normal matrix is not invertible (condition number {condition:.3e})",
            condition_number=condition,
        )


def _degenerate(first: GmmEstimate) -> GmmEstimate:
    return first.model_copy(update={
        "first_step_objective": first.objective_value,
        "second_step_degenerate": True,
        "weight_regularized": True,
    })
