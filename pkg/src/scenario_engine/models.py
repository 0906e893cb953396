from typing import Any, Dict, List, Optional, Tuple
from enum import Enum
from pydantic import BaseModel, Field, field_validator, model_validator


class ExperimentKind(str, Enum):
    MONTE_CARLO = "monte_carlo"
    FORECAST = "forecast"


class ExperimentScenario(BaseModel):
    id: str
    name: str
    kind: ExperimentKind
    description: Optional[str] = None
    cells: List[Tuple[int, int]] = Field(default_factory=list)
    reps: Optional[int] = None
    seed: int = 0
    horizon: Optional[int] = None
    simulation: Dict[str, Any] = Field(default_factory=dict)
    pipeline: Dict[str, Any] = Field(default_factory=dict)
    expected_runtime: Optional[int] = Field(default=None, description="Expected runtime in seconds")
    jobs: Optional[int] = Field(default=None, description="Worker processes for the grid")

    @field_validator("id")
    @classmethod
    def validate_id(cls, v):
        if not v or not v.strip():
            raise ValueError("id cannot be empty")
        return v

    @field_validator("name")
    @classmethod
    def validate_name(cls, v):
        if not v or not v.strip():
            raise ValueError("name cannot be empty")
        return v

    @field_validator("seed")
    @classmethod
    def validate_seed(cls, v):
        if v < 0:
            raise ValueError("seed cannot be negative")
        return v

    @model_validator(mode="after")
    def validate_kind_fields(self):
        if self.kind == ExperimentKind.MONTE_CARLO and not self.cells:
            raise ValueError("monte_carlo scenarios need at least one (n, t) cell")
        if self.kind == ExperimentKind.FORECAST and self.horizon is None:
            self.horizon = 20
        return self
