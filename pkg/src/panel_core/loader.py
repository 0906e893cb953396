import logging
from pathlib import Path
from typing import List, Optional, Union
import numpy as np
import pandas as pd
from .models import PanelDataset, PanelSchema
from src.errors import (
    DuplicateCell,
    MissingCell,
    NonNumericValue,
    PanelDataError,
    SchemaMismatch,
    TooFewPeriods,
    UnreadablePanel,
)
from .formatting import format_float

logger = logging.getLogger(__name__)


def _natural_order(labels: List[str]) -> List[str]:
    try:
        return sorted(labels, key=int)
    except ValueError:
        return sorted(labels)


class PanelLoader:
    """Reads and writes long-format panel CSV files (individual, period, y, x1..xp)."""

    def __init__(self, schema: Optional[PanelSchema] = None):
        self.schema = schema or PanelSchema()

    def load_from_file(self, file_path: Union[str, Path]) -> PanelDataset:
        file_path = Path(file_path)

        if not file_path.exists():
            raise PanelDataError(f"Panel file not found: {file_path}")

        try:
            frame = pd.read_csv(
                file_path,
                dtype=str,
                keep_default_na=False,
                encoding="utf-8",
                skipinitialspace=True,
            )
        except pd.errors.EmptyDataError:
            raise UnreadablePanel(f"Panel file is empty: {file_path}")
        except pd.errors.ParserError as exc:
            raise UnreadablePanel(f"Panel file is not valid CSV: {file_path}: {exc}")
        except UnicodeDecodeError as exc:
            raise UnreadablePanel(f"Panel file is not UTF-8 text: {file_path} (byte {exc.start})")
        return self.load_from_frame(frame)

    def load_from_frame(self, frame: pd.DataFrame) -> PanelDataset:
        schema = self.schema
        x_cols = self._regressor_columns(frame)

        missing = [c for c in [schema.individual, schema.period, schema.y] + x_cols if c not in frame.columns]
        if missing:
            raise SchemaMismatch(f"Missing columns: {missing}")

        frame = frame.copy()
        frame[schema.individual] = frame[schema.individual].astype(str).str.strip()
        frame[schema.period] = frame[schema.period].astype(str).str.strip()

        duplicated = frame.duplicated(subset=[schema.individual, schema.period], keep=False)
        if duplicated.any():
            first = frame.loc[duplicated].iloc[0]
            raise DuplicateCell(
                f"Cell ({first[schema.individual]}, {first[schema.period]}) appears more than once"
            )

        values = {}
        for col in [schema.y] + x_cols:
            raw = frame[col].astype(str).str.strip()
            if (raw == "").any():
                row = int(np.flatnonzero((raw == "").to_numpy())[0])
                raise MissingCell(f"Empty value in column '{col}' at data row {row + 1}")
            numeric = pd.to_numeric(raw, errors="coerce")
            bad = ~np.isfinite(numeric.to_numpy(dtype=float))
            if bad.any():
                row = int(np.flatnonzero(bad)[0])
                raise NonNumericValue(f"Non-numeric value '{raw.iloc[row]}' in column '{col}'")
            values[col] = numeric.to_numpy(dtype=float)

        individuals = _natural_order(list(frame[schema.individual].unique()))
        periods = _natural_order(list(frame[schema.period].unique()))

        if len(periods) < 3:
            raise TooFewPeriods(f"Panel needs at least 3 periods, got {len(periods)}")

        if len(frame) != len(individuals) * len(periods):
            raise MissingCell(
                f"Unbalanced panel: {len(frame)} rows for "
                f"{len(individuals)} individuals x {len(periods)} periods"
            )

        row_index = pd.Index(individuals).get_indexer(frame[schema.individual])
        col_index = pd.Index(periods).get_indexer(frame[schema.period])

        n, t, p = len(individuals), len(periods), len(x_cols)
        y = np.empty((n, t))
        x = np.empty((n, t, p))
        y[row_index, col_index] = values[schema.y]
        for j, col in enumerate(x_cols):
            x[row_index, col_index, j] = values[col]

        logger.debug("Loaded panel N=%d T=%d p=%d", n, t, p)

        return PanelDataset(y=y, x=x, individual_ids=individuals, period_ids=periods)

    def save_to_file(self, data: PanelDataset, file_path: Union[str, Path]) -> None:
        file_path = Path(file_path)
        file_path.parent.mkdir(parents=True, exist_ok=True)

        fmt = format_float
        header = ["individual", "period", "y"] + [f"x{j + 1}" for j in range(data.n_regressors)]
        lines = [",".join(header)]
        for i, ind in enumerate(data.individual_ids):
            for t, per in enumerate(data.period_ids):
                cells = [ind, per, fmt(data.y[i, t])] + [fmt(v) for v in data.x[i, t, :]]
                lines.append(",".join(cells))

        with open(file_path, "w", encoding="utf-8", newline="") as f:
            f.write("\n".join(lines) + "\n")

    def _regressor_columns(self, frame: pd.DataFrame) -> List[str]:
        if self.schema.x is not None:
            return list(self.schema.x)

        prefix = self.schema.x_prefix
        cols = [c for c in frame.columns if c.startswith(prefix) and c[len(prefix):].isdigit()]
        if not cols:
            raise SchemaMismatch(f"No regressor columns with prefix '{prefix}'")
        return sorted(cols, key=lambda c: int(c[len(prefix):]))


def load_panel(path: Union[str, Path], schema: Optional[PanelSchema] = None) -> PanelDataset:
    return PanelLoader(schema).load_from_file(path)


def save_panel(data: PanelDataset, path: Union[str, Path]) -> None:
    PanelLoader().save_to_file(data, path)
