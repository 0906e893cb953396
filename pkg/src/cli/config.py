import logging
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator
from src import __version__
from src.dmdfm_pipeline.models import DmdfmConfig
from src.simulation.models import SimulationConfig
from src.scenario_engine import ExperimentKind, ScenarioLoader, ScenarioValidator, read_structured
from src.errors import ConfigError, UsageError

logger = logging.getLogger(__name__)

SECTIONS = ("pipeline", "simulation", "run")
MANIFEST_KEYS = ("command", "input_path", "seed", "artifact_version")


class Command(str, Enum):
    ESTIMATE = "estimate"
    SIMULATE = "simulate"
    MONTECARLO = "montecarlo"
    FORECAST = "forecast"


SCENARIO_KINDS = {
    Command.MONTECARLO: ExperimentKind.MONTE_CARLO,
    Command.FORECAST: ExperimentKind.FORECAST,
}


class RunSettings(BaseModel):
    model_config = ConfigDict(frozen=True)

    scenario_id: Optional[str] = None
    cells: Optional[List[Tuple[int, int]]] = None
    reps: Optional[int] = None
    horizon: int = 20
    jobs: int = 1
    full: bool = False
    keep_estimates: bool = False
    expected_runtime: Optional[int] = None

    @field_validator("horizon")
    @classmethod
    def validate_horizon(cls, v):
        if v < 0:
            raise ValueError("horizon cannot be negative")
        return v

    @field_validator("reps", "jobs")
    @classmethod
    def validate_positive(cls, v):
        if v is not None and v < 1:
            raise ValueError("must be at least 1")
        return v


class CliConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    command: Command
    input_path: Optional[str] = None
    output_dir: str = "output"
    config_path: Optional[str] = None
    truth_path: Optional[str] = None
    verbosity: int = 0
    pipeline: DmdfmConfig = Field(default_factory=DmdfmConfig)
    simulation: SimulationConfig = Field(default_factory=SimulationConfig)
    run: RunSettings = Field(default_factory=RunSettings)

    @property
    def seed(self) -> int:
        return self.simulation.seed

    def manifest(self) -> Dict[str, Any]:
        """Config-file shaped record of the run; accepted back through --config."""
        return {
            "command": self.command.value,
            "input_path": self.input_path,
            "seed": self.seed,
            "artifact_version": __version__,
            "pipeline": self.pipeline.model_dump(mode="json"),
            "simulation": self.simulation.model_dump(mode="json"),
            "run": self.run.model_dump(mode="json"),
        }


def parse_cells(text: str) -> List[Tuple[int, int]]:
    cells = []
    for item in text.split(","):
        item = item.strip().lower()
        if not item:
            continue
        try:
            n, t = item.split("x")
            cells.append((int(n), int(t)))
        except ValueError as exc:
            raise UsageError(f"cell '{item}' is not of the form NxT") from exc
    if not cells:
        raise UsageError("--cells needs at least one NxT cell")
    return cells


def load_config_file(path: str) -> Dict[str, Any]:
    data = read_structured(path)
    unknown = set(data) - set(SECTIONS) - set(MANIFEST_KEYS)
    if unknown:
        raise ConfigError(f"Unknown config sections: {sorted(unknown)}")
    for section in SECTIONS:
        if not isinstance(data.get(section, {}), dict):
            raise ConfigError(f"Config section '{section}' must be a mapping")
    return data


def scenario_layer(reference: str, kind: ExperimentKind) -> Dict[str, Any]:
    """Config layer from a scenario file path or a scenario id under scenarios/."""
    loader = ScenarioLoader()
    if Path(reference).suffix:
        scenario = loader.load_from_file(reference)
    else:
        scenario = next((s for s in loader.load_by_kind(kind.value) if s.id == reference), None)
        if scenario is None:
            scenario = loader.load_by_id(reference)
            if scenario is None:
                raise ConfigError(f"No scenario with id '{reference}'")
    if scenario.kind != kind:
        raise ConfigError(
            f"Scenario '{scenario.id}' is a {scenario.kind.value} scenario, not {kind.value}"
        )

    issues = ScenarioValidator.validate(scenario)
    if issues:
        raise ConfigError(f"Scenario '{scenario.id}' is invalid: " + "; ".join(
            f"{i.field}: {i.message}" for i in issues
        ))

    run: Dict[str, Any] = {"scenario_id": scenario.id}
    if scenario.cells:
        run["cells"] = [list(c) for c in scenario.cells]
    for field in ("reps", "horizon", "jobs", "expected_runtime"):
        value = getattr(scenario, field)
        if value is not None:
            run[field] = value
    simulation = dict(scenario.simulation)
    if kind == ExperimentKind.FORECAST and scenario.cells:
        simulation.setdefault("n", scenario.cells[0][0])
        simulation.setdefault("t", scenario.cells[0][1])
    return {
        "seed": scenario.seed,
        "pipeline": dict(scenario.pipeline),
        "simulation": simulation,
        "run": run,
    }


def resolve(args) -> CliConfig:
    """Defaults, then scenario, then config file, then command-line flags."""
    layers: List[Dict[str, Any]] = []
    if getattr(args, "scenario", None):
        layers.append(scenario_layer(args.scenario, SCENARIO_KINDS[Command(args.command)]))
    if args.config:
        layers.append(load_config_file(args.config))

    sections: Dict[str, Dict[str, Any]] = {name: {} for name in SECTIONS}
    input_path = None
    for layer in layers:
        for name in SECTIONS:
            sections[name].update(layer.get(name) or {})
        if layer.get("seed") is not None:
            sections["simulation"]["seed"] = layer["seed"]
        if layer.get("input_path"):
            input_path = layer["input_path"]

    flags = sections["simulation"]
    for flag, key in (("n", "n"), ("t", "t"), ("seed", "seed"), ("reps", "reps")):
        value = getattr(args, flag, None)
        if value is not None:
            flags[key] = value

    run = sections["run"]
    if getattr(args, "cells", None):
        run["cells"] = parse_cells(args.cells)
    for flag in ("reps", "horizon", "jobs"):
        value = getattr(args, flag, None)
        if value is not None:
            run[flag] = value
    if getattr(args, "full", False):
        run["full"] = True

    if getattr(args, "input", None):
        input_path = args.input

    verbosity = -1 if args.quiet else args.verbose
    try:
        config = CliConfig(
            command=Command(args.command),
            input_path=input_path,
            output_dir=args.output_dir,
            config_path=args.config,
            truth_path=getattr(args, "truth", None),
            verbosity=verbosity,
            pipeline=DmdfmConfig(**sections["pipeline"]),
            simulation=SimulationConfig(**sections["simulation"]),
            run=RunSettings(**run),
        )
    except ValidationError as exc:
        raise ConfigError(f"Invalid configuration: {exc}") from exc

    if config.command == Command.ESTIMATE and not config.input_path:
        raise UsageError("estimate requires a panel CSV path")
    return config
