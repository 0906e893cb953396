from .models import PanelDataset, PanelSchema, LaggedView, frozen_array
from .loader import PanelLoader, load_panel, save_panel
from .transforms import lag_view, first_difference
from .formatting import format_float

__all__ = [
    "PanelDataset",
    "PanelSchema",
    "LaggedView",
    "frozen_array",
    "PanelLoader",
    "load_panel",
    "save_panel",
    "lag_view",
    "first_difference",
    "format_float",
]
