from .models import ExperimentKind, ExperimentScenario
from .loader import ScenarioLoader, read_structured
from .validator import ScenarioValidator, ValidationIssue

__all__ = [
    "ExperimentKind",
    "ExperimentScenario",
    "ScenarioLoader",
    "read_structured",
    "ScenarioValidator",
    "ValidationIssue",
]
