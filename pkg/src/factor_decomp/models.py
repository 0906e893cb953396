from typing import List
from enum import Enum
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from src.panel_core.models import frozen_array
from src.errors import DimensionMismatch


class SelectionCriterion(str, Enum):
    VARIANCE_CONTRIBUTION = "variance_contribution"
    SCREE = "scree"
    PCP1 = "pcp1"
    ICP1 = "icp1"


class SelectionScope(str, Enum):
    PER_PERIOD = "per_period"
    POOLED = "pooled"


class FactorDecomposition(BaseModel):
    """One PCA pass: input (m x d) = means + scores (m x k) @ loadings.T (k x d) + residuals."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    loadings: np.ndarray
    scores: np.ndarray
    eigenvalues: np.ndarray
    explained_share: np.ndarray
    residuals: np.ndarray
    means: np.ndarray

    @field_validator("loadings", "scores", "residuals", mode="before")
    @classmethod
    def _coerce_matrix(cls, v):
        return frozen_array(v, ndim=2)

    @field_validator("eigenvalues", "explained_share", "means", mode="before")
    @classmethod
    def _coerce_vector(cls, v):
        return frozen_array(v, ndim=1)

    @model_validator(mode="after")
    def _check_shapes(self):
        m, d = self.residuals.shape
        k = self.loadings.shape[1]
        if self.loadings.shape[0] != d or self.scores.shape != (m, k):
            raise DimensionMismatch("loadings/scores do not conform with the input matrix")
        if self.means.shape[0] != d:
            raise DimensionMismatch("column means do not match the input width")
        return self

    @property
    def n_factors(self) -> int:
        return self.loadings.shape[1]

    @property
    def common_component(self) -> np.ndarray:
        return self.scores @ self.loadings.T

    def reconstruct(self) -> np.ndarray:
        return self.means[None, :] + self.common_component


class SelectionReport(BaseModel):
    criterion: SelectionCriterion
    candidate_values: List[float] = Field(default_factory=list)
    chosen_k: int
    candidate_ks: List[int] = Field(default_factory=list)

    @field_validator("chosen_k")
    @classmethod
    def validate_chosen(cls, v):
        if v < 0:
            raise ValueError("chosen_k cannot be negative")
        return v

    def to_json_dict(self) -> dict:
        return {
            "criterion": self.criterion.value,
            "candidates": list(self.candidate_values),
            "chosen_k": self.chosen_k,
        }
