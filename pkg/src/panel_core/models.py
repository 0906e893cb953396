from typing import List, Optional
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from src.errors import DimensionMismatch, NonNumericValue, TooFewIndividuals, TooFewPeriods


def frozen_array(value, ndim: Optional[int] = None) -> np.ndarray:
    """Float64 copy of ``value`` marked read-only."""
    arr = np.array(value, dtype=float, copy=True)
    if ndim is not None and arr.ndim != ndim:
        raise DimensionMismatch(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


class PanelSchema(BaseModel):
    individual: str = "individual"
    period: str = "period"
    y: str = "y"
    x: Optional[List[str]] = None
    x_prefix: str = "x"


class PanelDataset(BaseModel):
    """Balanced panel: responses y (N x T) and regressors x (N x T x p)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    y: np.ndarray
    x: np.ndarray
    individual_ids: List[str] = Field(default_factory=list)
    period_ids: List[str] = Field(default_factory=list)

    @field_validator("y", mode="before")
    @classmethod
    def _coerce_y(cls, v):
        return frozen_array(v, ndim=2)

    @field_validator("x", mode="before")
    @classmethod
    def _coerce_x(cls, v):
        return frozen_array(v, ndim=3)

    @model_validator(mode="after")
    def _check_shape(self):
        n, t = self.y.shape
        if self.x.shape[:2] != (n, t):
            raise DimensionMismatch(
                f"y has shape {self.y.shape} but x has shape {self.x.shape}"
            )
        if n < 2:
            raise TooFewIndividuals(f"panel needs at least 2 individuals, got {n}")
        if t < 3:
            raise TooFewPeriods(f"panel needs at least 3 periods, got {t}")
        if not (np.isfinite(self.y).all() and np.isfinite(self.x).all()):
            raise NonNumericValue("panel contains non-finite values")
        if not self.individual_ids:
            object.__setattr__(self, "individual_ids", [str(i + 1) for i in range(n)])
        if not self.period_ids:
            object.__setattr__(self, "period_ids", [str(s) for s in range(t)])
        if len(self.individual_ids) != n or len(self.period_ids) != t:
            raise DimensionMismatch("label lists do not match the panel dimensions")
        return self

    @property
    def n_individuals(self) -> int:
        return self.y.shape[0]

    @property
    def n_periods(self) -> int:
        return self.y.shape[1]

    @property
    def n_regressors(self) -> int:
        return self.x.shape[2]

    def head_periods(self, count: int) -> "PanelDataset":
        return PanelDataset(
            y=self.y[:, :count],
            x=self.x[:, :count, :],
            individual_ids=list(self.individual_ids),
            period_ids=list(self.period_ids[:count]),
        )

    def scaled_regressors(self, factor: float) -> "PanelDataset":
        return PanelDataset(
            y=self.y,
            x=self.x * factor,
            individual_ids=list(self.individual_ids),
            period_ids=list(self.period_ids),
        )


class LaggedView(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    lag_order: int
    y_current: np.ndarray
    y_lagged: np.ndarray

    @field_validator("y_current", mode="before")
    @classmethod
    def _coerce_current(cls, v):
        return frozen_array(v, ndim=2)

    @field_validator("y_lagged", mode="before")
    @classmethod
    def _coerce_lagged(cls, v):
        return frozen_array(v, ndim=3)

    @model_validator(mode="after")
    def _check_alignment(self):
        if self.y_lagged.shape[:2] != self.y_current.shape:
            raise DimensionMismatch("current and lagged views are misaligned")
        if self.y_lagged.shape[2] != self.lag_order:
            raise DimensionMismatch("lagged view depth differs from lag_order")
        return self
