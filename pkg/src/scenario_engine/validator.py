from typing import List
from pydantic import ValidationError as PydanticValidationError
from .models import ExperimentKind, ExperimentScenario
from src.dmdfm_pipeline.models import DmdfmConfig
from src.simulation.models import SimulationConfig


class ValidationIssue:
    def __init__(self, field: str, message: str):
        self.field = field
        self.message = message

    def __repr__(self):
        return f"ValidationIssue(field={self.field}, message={self.message})"


class ScenarioValidator:
    @staticmethod
    def validate(scenario: ExperimentScenario) -> List[ValidationIssue]:
        issues = []

        issues.extend(ScenarioValidator._validate_cells(scenario))
        issues.extend(ScenarioValidator._validate_overrides(scenario))
        issues.extend(ScenarioValidator._validate_consistency(scenario))

        return issues

    @staticmethod
    def _validate_cells(scenario: ExperimentScenario) -> List[ValidationIssue]:
        issues = []
        seen = set()

        for n, t in scenario.cells:
            if n < 2:
                issues.append(ValidationIssue("cells", f"Cell ({n}, {t}) needs at least 2 individuals"))
            if t < 4:
                issues.append(ValidationIssue("cells", f"Cell ({n}, {t}) needs at least 4 periods"))
            if (n, t) in seen:
                issues.append(ValidationIssue("cells", f"Cell ({n}, {t}) is listed twice"))
            seen.add((n, t))

        for field in ("reps", "jobs", "expected_runtime"):
            value = getattr(scenario, field)
            if value is not None and value < 1:
                issues.append(ValidationIssue(field, "Must be at least 1"))

        return issues

    @staticmethod
    def _validate_overrides(scenario: ExperimentScenario) -> List[ValidationIssue]:
        issues = []

        unknown = set(scenario.simulation) - set(SimulationConfig.model_fields)
        if unknown:
            issues.append(ValidationIssue("simulation", f"Unknown simulation keys: {sorted(unknown)}"))
        else:
            try:
                SimulationConfig(**scenario.simulation)
            except PydanticValidationError as exc:
                issues.append(ValidationIssue("simulation", str(exc.errors()[0]["msg"])))

        unknown = set(scenario.pipeline) - set(DmdfmConfig.model_fields)
        if unknown:
            issues.append(ValidationIssue("pipeline", f"Unknown pipeline keys: {sorted(unknown)}"))
        else:
            try:
                DmdfmConfig(**scenario.pipeline)
            except PydanticValidationError as exc:
                issues.append(ValidationIssue("pipeline", str(exc.errors()[0]["msg"])))

        return issues

    @staticmethod
    def _validate_consistency(scenario: ExperimentScenario) -> List[ValidationIssue]:
        issues = []

        if scenario.kind == ExperimentKind.FORECAST:
            if scenario.horizon is not None and scenario.horizon < 1:
                issues.append(ValidationIssue("horizon", "Must be at least 1"))
            if len(scenario.cells) > 1:
                issues.append(ValidationIssue("cells", "Forecast scenarios use a single (n, t) cell"))

        if scenario.kind == ExperimentKind.MONTE_CARLO and scenario.horizon is not None:
            issues.append(ValidationIssue("horizon", "Only forecast scenarios take a horizon"))

        return issues

    @staticmethod
    def is_valid(scenario: ExperimentScenario) -> bool:
        return len(ScenarioValidator.validate(scenario)) == 0
