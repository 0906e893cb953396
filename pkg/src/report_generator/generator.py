import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union
import numpy as np
from rich.console import Console
from rich.panel import Panel
from rich.table import Table
from src.dmdfm_pipeline.models import DmdfmFit
from src.simulation.models import ForecastTable, McReport
from .formatter import ReportFormatter

PathLike = Union[str, Path]

MC_COLUMNS = ["n", "t", "reps", "failures", "failure_rate", "valid"]


def _write_lines(lines: List[str], output_file: PathLike) -> None:
    output_file = Path(output_file)
    output_file.parent.mkdir(parents=True, exist_ok=True)
    with open(output_file, "w", encoding="utf-8", newline="") as f:
        f.write("\n".join(lines) + "\n")


def write_json(payload: Dict[str, Any], output_file: PathLike) -> None:
    text = json.dumps(ReportFormatter.clean(payload), indent=2, allow_nan=False)
    _write_lines([text], output_file)


class ReportGenerator:
    def __init__(self, console: Optional[Console] = None):
        self.console = console or Console()

    def generate_text_report(self, fit: DmdfmFit) -> str:
        fmt = ReportFormatter.format_for_console
        lines = []
        lines.append("=" * 60)
        lines.append("DMDFM ESTIMATION")
        lines.append("=" * 60)
        lines.append(f"Individuals: {fit.n_individuals}  Periods: {fit.n_periods}")
        lines.append(f"Regressor factors r: {fit.r}  Error factors s: {fit.s}")
        lines.append(f"Outer iterations: {fit.iterations}  Converged: {fit.converged} ({fit.stop_reason.value})")
        lines.append("-" * 60)
        for name, value, se in zip(fit.coefficient_names(), fit.coefficients, fit.std_errors):
            lines.append(f"{name:.<20} {fmt(float(value)):>12}  (se {fmt(float(se))})")
        lines.append("=" * 60)
        return "\n".join(lines)

    def print_fit(self, fit: DmdfmFit) -> None:
        status = "[green]converged[/green]" if fit.converged else "[red]not converged[/red]"
        self.console.print(Panel.fit(
            f"[bold]DMDFM ESTIMATION[/bold]\n"
            f"N={fit.n_individuals} T={fit.n_periods} | r={fit.r} s={fit.s} | "
            f"{fit.iterations} iterations, {status}",
            border_style="cyan",
        ))

        table = Table(title="Coefficients")
        table.add_column("Coefficient", style="cyan")
        table.add_column("Estimate", justify="right")
        table.add_column("Std. error", justify="right")
        for name, value, se in zip(fit.coefficient_names(), fit.coefficients, fit.std_errors):
            table.add_row(
                name,
                ReportFormatter.format_for_console(float(value)),
                ReportFormatter.format_for_console(float(se)),
            )
        self.console.print(table)

    def print_monte_carlo(self, report: McReport) -> None:
        table = Table(title="Bias and RMSE")
        table.add_column("(N,T)", style="cyan")
        for name in report.coefficient_names:
            table.add_column(f"bias {name}", justify="right")
        for name in report.coefficient_names:
            table.add_column(f"rmse {name}", justify="right")
        table.add_column("failures", justify="right")

        for cell in report.cells:
            label = f"({cell.n},{cell.t})" if cell.valid else f"[red]({cell.n},{cell.t})[/red]"
            table.add_row(
                label,
                *[ReportFormatter.format_for_console(v) for v in cell.bias],
                *[ReportFormatter.format_for_console(v) for v in cell.rmse],
                f"{cell.failures}/{cell.reps}",
            )
        self.console.print(table)

    def print_forecast(self, forecast: ForecastTable) -> None:
        fmt = ReportFormatter.format_for_console
        self.console.print(
            f"[bold]Forecast[/bold] horizon={forecast.horizon} "
            f"MAE={fmt(forecast.mae, 4)} MAPE={fmt(forecast.mape, 2)}% "
            f"corr(avg)={fmt(forecast.average_correlation, 3)}"
        )

    def export_fit_json(self, fit: DmdfmFit, output_file: PathLike, extra: Optional[Dict[str, Any]] = None) -> None:
        payload = fit.to_json_dict()
        if extra:
            payload.update(extra)
        write_json(payload, output_file)

    def export_matrix_csv(
        self,
        matrix: np.ndarray,
        individual_ids: Sequence[str],
        period_ids: Sequence[str],
        output_file: PathLike,
    ) -> None:
        """Long layout `individual,period,value`, one row per cell."""
        fmt = ReportFormatter.format_for_file
        lines = ["individual,period,value"]
        for i, ind in enumerate(individual_ids):
            for t, per in enumerate(period_ids):
                lines.append(f"{ind},{per},{fmt(matrix[i, t])}")
        _write_lines(lines, output_file)

    def export_monte_carlo_csv(self, report: McReport, output_file: PathLike) -> None:
        fmt = ReportFormatter.format_for_file
        header = (
            MC_COLUMNS
            + [f"bias_{name}" for name in report.coefficient_names]
            + [f"rmse_{name}" for name in report.coefficient_names]
        )
        lines = [",".join(header)]
        for cell in report.cells:
            cells = [
                str(cell.n),
                str(cell.t),
                str(cell.reps),
                str(cell.failures),
                fmt(cell.failure_rate),
                "true" if cell.valid else "false",
            ]
            cells += [fmt(v) for v in cell.bias] + [fmt(v) for v in cell.rmse]
            lines.append(",".join(cells))
        _write_lines(lines, output_file)

    def export_monte_carlo_json(self, report: McReport, output_file: PathLike) -> None:
        payload = report.model_dump(mode="json", exclude_none=True)
        for cell, dumped in zip(report.cells, payload["cells"]):
            dumped["failure_rate"] = cell.failure_rate
        write_json(payload, output_file)

    def export_forecast_csv(self, forecast: ForecastTable, output_file: PathLike) -> None:
        fmt = ReportFormatter.format_for_file
        lines = ["period,individual,y_true,y_pred"]
        for row in forecast.rows:
            lines.append(f"{row.period},{row.individual},{fmt(row.y_true)},{fmt(row.y_pred)}")
        _write_lines(lines, output_file)

    def export_forecast_json(self, forecast: ForecastTable, output_file: PathLike) -> None:
        true_avg, pred_avg = forecast.average_series()
        payload = forecast.summary()
        payload["average_true"] = true_avg.tolist()
        payload["average_pred"] = pred_avg.tolist()
        write_json(payload, output_file)
