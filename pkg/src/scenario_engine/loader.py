import json
import logging
import yaml
from pathlib import Path
from typing import List, Optional, Union
from pydantic import ValidationError
from .models import ExperimentScenario
from src.errors import ConfigError

logger = logging.getLogger(__name__)

SUFFIXES = (".json", ".yaml", ".yml")


def read_structured(file_path: Union[str, Path]) -> dict:
    """Parse a YAML or JSON mapping, raising ConfigError on anything else."""
    file_path = Path(file_path)
    if not file_path.exists():
        raise ConfigError(f"File not found: {file_path}")

    with open(file_path, "r", encoding="utf-8") as f:
        try:
            if file_path.suffix in (".yaml", ".yml"):
                data = yaml.safe_load(f)
            elif file_path.suffix == ".json":
                data = json.load(f)
            else:
                raise ConfigError(f"Unsupported file format: {file_path.suffix}")
        except (yaml.YAMLError, json.JSONDecodeError) as exc:
            raise ConfigError(f"Cannot parse {file_path}: {exc}") from exc

    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{file_path} must contain a mapping at the top level")
    return data


class ScenarioLoader:
    def __init__(self, scenarios_dir: Optional[Union[str, Path]] = None):
        if scenarios_dir is None:
            self.scenarios_dir = Path(__file__).parent.parent.parent / "scenarios"
        else:
            self.scenarios_dir = Path(scenarios_dir)

    def load_from_file(self, file_path: Union[str, Path]) -> ExperimentScenario:
        return self.load_from_dict(read_structured(file_path))

    def load_from_dict(self, data: dict) -> ExperimentScenario:
        try:
            return ExperimentScenario(**data)
        except ValidationError as exc:
            raise ConfigError(f"Invalid scenario: {exc}") from exc

    def load_all(self) -> List[ExperimentScenario]:
        scenarios = []
        if not self.scenarios_dir.exists():
            return scenarios

        for file_path in sorted(p for p in self.scenarios_dir.rglob("*") if p.suffix in SUFFIXES):
            try:
                scenarios.append(self.load_from_file(file_path))
            except ConfigError as e:
                logger.warning("Skipping %s: %s", file_path, e)

        return scenarios

    def load_by_kind(self, kind: str) -> List[ExperimentScenario]:
        return [s for s in self.load_all() if s.kind.value == kind]

    def load_by_id(self, scenario_id: str) -> Optional[ExperimentScenario]:
        for scenario in self.load_all():
            if scenario.id == scenario_id:
                return scenario
        return None
