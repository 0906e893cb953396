from .generator import ReportGenerator, write_json
from .formatter import ReportFormatter

__all__ = [
    "ReportGenerator",
    "ReportFormatter",
    "write_json",
]
