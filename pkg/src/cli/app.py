import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import List, Optional
from rich.console import Console
from rich.logging import RichHandler
from src import __version__
from src.panel_core import load_panel, save_panel
from src.dmdfm_pipeline import DmdfmEstimator, residual_diagnostics
from src.simulation import (
    DESK_CELLS,
    DESK_REPS,
    FULL_CELLS,
    FULL_REPS,
    MonteCarloRunner,
    PipelineReplicationEstimator,
    SimulationTruth,
    generate_panel,
    grid_configs,
    implied_factor_coefficients,
    run_forecast_experiment,
)
from src.scenario_engine import read_structured
from src.report_generator import ReportGenerator, write_json
from src.errors import DmdfmError, NonConvergence, UsageError
from .config import CliConfig, Command, resolve

logger = logging.getLogger(__name__)

MANIFEST_FILE = "run-manifest.json"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--output-dir", default="output", help="Directory for result files")
    common.add_argument("--config", help="YAML or JSON config file (or a run manifest)")
    common.add_argument("--seed", type=int, help="Seed for all randomness")
    common.add_argument("-v", "--verbose", action="count", default=0)
    common.add_argument("-q", "--quiet", action="store_true")

    sizes = _Parser(add_help=False)
    sizes.add_argument("--n", type=int, help="Number of individuals")
    sizes.add_argument("--t", type=int, help="Number of periods")

    parser = _Parser(prog="dmdfm", description="Dynamic mixed double factor model")
    parser.add_argument("--version", action="version", version=__version__)
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    estimate = commands.add_parser("estimate", parents=[common], help="Fit a panel CSV")
    estimate.add_argument("input", nargs="?", help="Long-format panel CSV")
    estimate.add_argument("--truth", help="truth.json from simulate, for true-factor coefficients")

    commands.add_parser("simulate", parents=[common, sizes], help="Generate a panel")

    montecarlo = commands.add_parser("montecarlo", parents=[common], help="Bias/RMSE grid")
    montecarlo.add_argument("--cells", help="Comma-separated NxT cells, e.g. 20x5,50x5")
    montecarlo.add_argument("--reps", type=int)
    montecarlo.add_argument("--jobs", type=int, help="Worker processes")
    montecarlo.add_argument("--full", action="store_true", help="Ten-cell grid with 2000 replications")
    montecarlo.add_argument("--scenario", help="Scenario file or id")

    forecast = commands.add_parser("forecast", parents=[common, sizes], help="Rolling forecast experiment")
    forecast.add_argument("--horizon", type=int)
    forecast.add_argument("--scenario", help="Scenario file or id")

    return parser


def configure_logging(verbosity: int) -> None:
    if verbosity < 0:
        level = logging.ERROR
    else:
        level = [logging.WARNING, logging.INFO, logging.DEBUG][min(verbosity, 2)]
    logging.basicConfig(
        level=level,
        format="%(message)s",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False, show_time=False)],
        force=True,
    )


class CliApp:
    def __init__(self, config: CliConfig, console: Optional[Console] = None):
        self.config = config
        self.output_dir = Path(config.output_dir)
        self.reports = ReportGenerator(console or Console(quiet=config.verbosity < 0))

    def run(self) -> None:
        self.output_dir.mkdir(parents=True, exist_ok=True)
        handler = {
            Command.ESTIMATE: self.estimate,
            Command.SIMULATE: self.simulate,
            Command.MONTECARLO: self.montecarlo,
            Command.FORECAST: self.forecast,
        }[self.config.command]
        write_json(self.config.manifest(), self.output_dir / MANIFEST_FILE)

        run = self.config.run
        if run.expected_runtime is not None:
            logger.info("Scenario %s: expected runtime about %d s", run.scenario_id, run.expected_runtime)
        started = time.perf_counter()
        handler()
        elapsed = time.perf_counter() - started
        logger.info("Finished %s in %.1f s", self.config.command.value, elapsed)
        if run.expected_runtime is not None and elapsed > 2 * run.expected_runtime:
            logger.warning(
                "Run took %.0f s, more than twice the %d s expected for scenario %s",
                elapsed, run.expected_runtime, run.scenario_id,
            )

    def estimate(self) -> None:
        config = self.config
        data = load_panel(config.input_path)
        fit = DmdfmEstimator(config.pipeline).estimate(data)

        extra = {"diagnostics": residual_diagnostics(fit).to_json_dict()}
        if config.truth_path:
            truth = SimulationTruth.from_json_dict(read_structured(config.truth_path))
            implied = implied_factor_coefficients(fit, truth)
            extra["true_factor_coefficients"] = dict(
                zip(["beta_l", "beta_f1", "beta_f2"], implied.tolist())
            )

        self.reports.export_fit_json(fit, self.output_dir / "fit.json", extra)
        (self.output_dir / "fit.txt").write_text(self.reports.generate_text_report(fit) + "\n", encoding="utf-8")
        periods = data.period_ids[1:]
        self.reports.export_matrix_csv(fit.fitted, data.individual_ids, periods, self.output_dir / "fitted.csv")
        self.reports.export_matrix_csv(fit.residuals, data.individual_ids, periods, self.output_dir / "residuals.csv")
        self.reports.print_fit(fit)

        if not fit.converged:
            raise NonConvergence(
                f"outer iteration did not converge in {fit.iterations} rounds; results written"
            )

    def simulate(self) -> None:
        data, truth = generate_panel(self.config.simulation, rep_index=0)
        save_panel(data, self.output_dir / "panel.csv")
        write_json(truth.to_json_dict(), self.output_dir / "truth.json")
        logger.info("Wrote a %d x %d panel", data.n_individuals, data.n_periods)

    def montecarlo(self) -> None:
        run = self.config.run
        cells = run.cells or (FULL_CELLS if run.full else DESK_CELLS)
        reps = run.reps or (FULL_REPS if run.full else DESK_REPS)
        configs = grid_configs(self.config.simulation, cells, reps)

        runner = MonteCarloRunner(
            PipelineReplicationEstimator(self.config.pipeline),
            jobs=run.jobs,
            keep_estimates=run.keep_estimates,
        )
        report = runner.run(configs)
        self.reports.export_monte_carlo_csv(report, self.output_dir / "montecarlo.csv")
        self.reports.export_monte_carlo_json(report, self.output_dir / "montecarlo.json")
        self.reports.print_monte_carlo(report)

    def forecast(self) -> None:
        table = run_forecast_experiment(
            self.config.simulation,
            horizon=self.config.run.horizon,
            pipeline_config=self.config.pipeline,
        )
        self.reports.export_forecast_csv(table, self.output_dir / "forecast.csv")
        self.reports.export_forecast_json(table, self.output_dir / "forecast.json")
        self.reports.print_forecast(table)


def _report_error(exc: DmdfmError) -> int:
    line = json.dumps({
        "error": type(exc).__name__,
        "exit_code": exc.exit_code,
        "message": str(exc),
    })
    print(line, file=sys.stderr)
    return exc.exit_code


def run(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        config = resolve(args)
        configure_logging(config.verbosity)
        CliApp(config).run()
    except DmdfmError as exc:
        return _report_error(exc)
    return 0


def main() -> None:
    sys.exit(run())
