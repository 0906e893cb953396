from typing import Any, Dict, List, Literal, Optional, Union
from enum import Enum
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from src.panel_core.models import frozen_array
from src.factor_decomp.models import (
    FactorDecomposition,
    SelectionCriterion,
    SelectionReport,
    SelectionScope,
)
from src.gmm.models import FInstrumentMode, GmmEstimate, GmmSteps, WeightPattern

AUTO_DEPTH_PERIODS = 8
AUTO_DEPTH = 4


class GExtrapolation(str, Enum):
    HOLD_LAST = "hold_last"
    AR1 = "ar1"


class OuterStop(str, Enum):
    COEFFICIENTS_SETTLED = "coefficients_settled"
    OBJECTIVE_ROSE = "objective_rose"
    ITERATION_CAP = "iteration_cap"


class DmdfmConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    variance_threshold: float = 0.8
    kmax_r: int = 4
    kmax_s: int = 4
    r_criterion: SelectionCriterion = SelectionCriterion.VARIANCE_CONTRIBUTION
    r_scope: SelectionScope = SelectionScope.PER_PERIOD
    s_criterion: SelectionCriterion = SelectionCriterion.ICP1
    r_override: Optional[int] = None
    s_override: Optional[int] = None
    gmm_steps: GmmSteps = GmmSteps.TWO
    max_lag_depth: Union[int, Literal["auto"], None] = "auto"
    f_instruments: FInstrumentMode = FInstrumentMode.ALL_PERIODS
    weight_pattern: WeightPattern = WeightPattern.FIRST_DIFFERENCE
    include_lag: bool = True
    max_outer_iterations: int = 100
    convergence_tol: float = 1e-6
    g_extrapolation: GExtrapolation = GExtrapolation.HOLD_LAST
    diagnostics_z: float = 2.0

    @field_validator("variance_threshold")
    @classmethod
    def validate_threshold(cls, v):
        if not 0 < v <= 1:
            raise ValueError("variance_threshold must lie in (0, 1]")
        return v

    @field_validator("convergence_tol", "diagnostics_z")
    @classmethod
    def validate_positive(cls, v):
        if v <= 0:
            raise ValueError("must be positive")
        return v

    @field_validator("kmax_r", "max_outer_iterations")
    @classmethod
    def validate_at_least_one(cls, v):
        if v < 1:
            raise ValueError("must be at least 1")
        return v

    @field_validator("kmax_s")
    @classmethod
    def validate_kmax_s(cls, v):
        if v < 0:
            raise ValueError("kmax_s cannot be negative")
        return v

    @field_validator("r_override", "s_override")
    @classmethod
    def validate_override(cls, v):
        if v is not None and v < 0:
            raise ValueError("factor count overrides cannot be negative")
        return v

    @field_validator("max_lag_depth")
    @classmethod
    def validate_depth(cls, v):
        if isinstance(v, int) and v < 1:
            raise ValueError("max_lag_depth must be at least 1")
        return v

    @field_validator("r_criterion")
    @classmethod
    def validate_r_criterion(cls, v):
        if v not in (SelectionCriterion.VARIANCE_CONTRIBUTION, SelectionCriterion.SCREE):
            raise ValueError("r_criterion must be variance_contribution or scree")
        return v

    @field_validator("s_criterion")
    @classmethod
    def validate_s_criterion(cls, v):
        if v not in (SelectionCriterion.PCP1, SelectionCriterion.ICP1):
            raise ValueError("s_criterion must be pcp1 or icp1")
        return v

    def lag_depth_for(self, n_periods: int) -> Optional[int]:
        if self.max_lag_depth == "auto":
            return None if n_periods <= AUTO_DEPTH_PERIODS else AUTO_DEPTH
        return self.max_lag_depth


class ResidualDiagnostics(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    means: np.ndarray
    variances: np.ndarray
    autocorrelations: np.ndarray
    mean_flags: np.ndarray
    autocorrelation_flags: np.ndarray
    z: float

    @field_validator("means", "variances", "autocorrelations", mode="before")
    @classmethod
    def _coerce(cls, v):
        return frozen_array(v, ndim=1)

    @field_validator("mean_flags", "autocorrelation_flags", mode="before")
    @classmethod
    def _coerce_flags(cls, v):
        flags = np.array(v, dtype=bool)
        flags.setflags(write=False)
        return flags

    @property
    def mean_flag_rate(self) -> float:
        return float(self.mean_flags.mean()) if self.mean_flags.size else 0.0

    @property
    def autocorrelation_flag_rate(self) -> float:
        return float(self.autocorrelation_flags.mean()) if self.autocorrelation_flags.size else 0.0

    def to_json_dict(self) -> Dict[str, Any]:
        return {
            "z": self.z,
            "mean_flag_rate": self.mean_flag_rate,
            "autocorrelation_flag_rate": self.autocorrelation_flag_rate,
            "flagged_means": np.flatnonzero(self.mean_flags).tolist(),
            "flagged_autocorrelations": np.flatnonzero(self.autocorrelation_flags).tolist(),
        }


class DmdfmFit(BaseModel):
    """Result of the two-stage estimation.

    fitted and residuals cover periods 1..T-1 (N x (T-1));
    interactive_term is N x T with a zero first column.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    config: DmdfmConfig
    regressor_factors: FactorDecomposition
    error_factors: FactorDecomposition
    beta_l: float
    beta_f: np.ndarray
    individual_effects: np.ndarray
    interactive_term: np.ndarray
    fitted: np.ndarray
    residuals: np.ndarray
    first_stage: GmmEstimate
    second_stage: GmmEstimate
    r_report: Optional[SelectionReport] = None
    s_report: Optional[SelectionReport] = None
    objective_trace: List[float] = Field(default_factory=list)
    coefficient_changes: List[float] = Field(default_factory=list)
    iterations: int = 0
    converged: bool = True
    stop_reason: OuterStop = OuterStop.COEFFICIENTS_SETTLED

    @field_validator("beta_f", "individual_effects", mode="before")
    @classmethod
    def _coerce_vector(cls, v):
        return frozen_array(v, ndim=1)

    @field_validator("interactive_term", "fitted", "residuals", mode="before")
    @classmethod
    def _coerce_matrix(cls, v):
        return frozen_array(v, ndim=2)

    @model_validator(mode="after")
    def _check_shapes(self):
        if self.fitted.shape != self.residuals.shape:
            raise ValueError("fitted and residuals must have the same shape")
        if self.beta_f.shape[0] != self.regressor_factors.n_factors:
            raise ValueError("beta_f length differs from the number of regressor factors")
        return self

    @property
    def r(self) -> int:
        return self.regressor_factors.n_factors

    @property
    def s(self) -> int:
        return self.error_factors.n_factors

    @property
    def n_individuals(self) -> int:
        return self.fitted.shape[0]

    @property
    def n_periods(self) -> int:
        return self.interactive_term.shape[1]

    @property
    def coefficients(self) -> np.ndarray:
        return np.concatenate([[self.beta_l], self.beta_f])

    @property
    def std_errors(self) -> np.ndarray:
        se = self.second_stage.std_errors
        return se if self.second_stage.include_lag else np.concatenate([[np.nan], se])

    def regressor_scores(self) -> np.ndarray:
        """F~ as N x T x r."""
        n, t = self.n_individuals, self.n_periods
        return self.regressor_factors.scores.reshape(n, t, self.r)

    def coefficient_names(self) -> List[str]:
        return ["beta_l"] + [f"beta_f{j + 1}" for j in range(self.r)]

    def to_json_dict(self) -> Dict[str, Any]:
        names = self.coefficient_names()
        std_errors = [None if np.isnan(v) else float(v) for v in self.std_errors]
        return {
            "coefficients": dict(zip(names, self.coefficients.tolist())),
            "standard_errors": dict(zip(names, std_errors)),
            "r": self.r,
            "s": self.s,
            "selection": {
                "r": self.r_report.to_json_dict() if self.r_report else None,
                "s": self.s_report.to_json_dict() if self.s_report else None,
            },
            "iterations": self.iterations,
            "converged": self.converged,
            "stop_reason": self.stop_reason.value,
            "objective_trace": list(self.objective_trace),
            "coefficient_changes": list(self.coefficient_changes),
            "first_stage": self.first_stage.to_json_dict(),
            "second_stage": self.second_stage.to_json_dict(),
            "config": self.config.model_dump(mode="json"),
        }
