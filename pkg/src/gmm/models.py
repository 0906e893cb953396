from typing import Any, Dict, List, Optional
from enum import Enum
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from src.panel_core.models import frozen_array
from src.errors import DimensionMismatch


class WeightPattern(str, Enum):
    FIRST_DIFFERENCE = "first_difference"
    IDENTITY = "identity"


class FInstrumentMode(str, Enum):
    ALL_PERIODS = "all_periods"
    CONTEMPORANEOUS = "contemporaneous"


class GmmSteps(str, Enum):
    ONE = "one"
    TWO = "two"


class WeightKind(str, Enum):
    ONE_STEP = "one_step"
    TWO_STEP = "two_step"
    USER = "user"


class GmmProblem(BaseModel):
    """Differenced equation dy = rho * dy_lag + df @ beta_f + d_eps with block-diagonal instruments.

    instruments has shape N x L x Tb: for individual i, instruments[i] is Z_i
    with one column per usable differenced period t = 2..T.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    dy: np.ndarray
    dy_lag: np.ndarray
    df: np.ndarray
    instruments: np.ndarray
    moment_count: int
    base_periods: int
    block_sizes: List[int] = Field(default_factory=list)
    include_lag: bool = True
    weight_pattern: WeightPattern = WeightPattern.FIRST_DIFFERENCE
    f_instruments: FInstrumentMode = FInstrumentMode.ALL_PERIODS
    max_lag_depth: Optional[int] = None

    @field_validator("dy", "dy_lag", mode="before")
    @classmethod
    def _coerce_matrix(cls, v):
        return frozen_array(v, ndim=2)

    @field_validator("df", "instruments", mode="before")
    @classmethod
    def _coerce_tensor(cls, v):
        return frozen_array(v, ndim=3)

    @model_validator(mode="after")
    def _check_shapes(self):
        n, tb = self.dy.shape
        if self.dy_lag.shape != (n, tb) or self.df.shape[:2] != (n, tb):
            raise DimensionMismatch("differenced series are misaligned")
        if self.instruments.shape[0] != n or self.instruments.shape[2] != tb:
            raise DimensionMismatch("instrument blocks do not match the differenced sample")
        if self.instruments.shape[1] != self.moment_count:
            raise DimensionMismatch("moment_count differs from the instrument row count")
        if self.block_sizes and sum(self.block_sizes) != self.moment_count:
            raise DimensionMismatch("block sizes do not add up to moment_count")
        return self

    @property
    def n_individuals(self) -> int:
        return self.dy.shape[0]

    @property
    def n_blocks(self) -> int:
        return self.dy.shape[1]

    @property
    def n_factors(self) -> int:
        return self.df.shape[2]

    @property
    def n_params(self) -> int:
        return self.n_factors + (1 if self.include_lag else 0)

    @property
    def regressors(self) -> np.ndarray:
        """N x Tb x k design: (dy_lag, df) or df alone when the lag is dropped."""
        if self.include_lag:
            return np.concatenate([self.dy_lag[:, :, None], self.df], axis=2)
        return np.array(self.df)

    @property
    def u_matrix(self) -> np.ndarray:
        tb = self.n_blocks
        if self.weight_pattern == WeightPattern.IDENTITY:
            return np.eye(tb)
        return 2.0 * np.eye(tb) - np.eye(tb, k=1) - np.eye(tb, k=-1)


class WeightMatrix(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    matrix: np.ndarray
    kind: WeightKind = WeightKind.USER
    regularized: bool = False

    @field_validator("matrix", mode="before")
    @classmethod
    def _coerce(cls, v):
        return frozen_array(v, ndim=2)


class GmmEstimate(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    rho_hat: float
    beta_f_hat: np.ndarray
    residuals: np.ndarray
    weight_used: np.ndarray
    avar: np.ndarray
    objective_value: float
    moment_count: int
    include_lag: bool = True
    first_step_objective: Optional[float] = None
    weight_regularized: bool = False
    second_step_degenerate: bool = False

    @field_validator("beta_f_hat", mode="before")
    @classmethod
    def _coerce_vector(cls, v):
        return frozen_array(v, ndim=1)

    @field_validator("residuals", "weight_used", "avar", mode="before")
    @classmethod
    def _coerce_matrix(cls, v):
        return frozen_array(v, ndim=2)

    @property
    def coefficients(self) -> np.ndarray:
        if self.include_lag:
            return np.concatenate([[self.rho_hat], self.beta_f_hat])
        return np.array(self.beta_f_hat)

    @property
    def std_errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.avar), 0.0, None))

    def to_json_dict(self) -> Dict[str, Any]:
        names = (["rho"] if self.include_lag else []) + [
            f"beta_f{j + 1}" for j in range(self.beta_f_hat.shape[0])
        ]
        return {
            "coefficients": dict(zip(names, self.coefficients.tolist())),
            "standard_errors": dict(zip(names, self.std_errors.tolist())),
            "objective_value": self.objective_value,
            "first_step_objective": self.first_step_objective,
            "moment_count": self.moment_count,
            "flags": {
                "weight_regularized": self.weight_regularized,
                "second_step_degenerate": self.second_step_degenerate,
            },
        }
