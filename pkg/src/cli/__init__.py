from .config import CliConfig, Command, RunSettings, parse_cells, resolve
from .app import CliApp, build_parser, run

__all__ = [
    "CliConfig",
    "Command",
    "RunSettings",
    "parse_cells",
    "resolve",
    "CliApp",
    "build_parser",
    "run",
]
