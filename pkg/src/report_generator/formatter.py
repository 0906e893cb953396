import math
from typing import Optional
from src.panel_core.formatting import format_float


class ReportFormatter:
    @staticmethod
    def format_for_console(value: Optional[float], digits: int = 5) -> str:
        if value is None or (isinstance(value, float) and math.isnan(value)):
            return "n/a"
        return f"{value:.{digits}f}"

    @staticmethod
    def format_for_file(value: float) -> str:
        return format_float(value)

    @staticmethod
    def clean(value):
        """JSON-safe copy: NaN and infinities become None."""
        if isinstance(value, float):
            return value if math.isfinite(value) else None
        if isinstance(value, dict):
            return {k: ReportFormatter.clean(v) for k, v in value.items()}
        if isinstance(value, (list, tuple)):
            return [ReportFormatter.clean(v) for v in value]
        return value
