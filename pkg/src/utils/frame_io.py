"""
Frame IO - Price CSV ingestion and return-frame round trips
"""

import logging
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from utils.errors import ConfigError, DataFormatError

logger = logging.getLogger(__name__)

DATE_COLUMN = "date"


def _csv_line(position: int) -> int:
    # Header is line 1
    return position + 2


def ingest_prices(path: Path, date_column: str = DATE_COLUMN,
                  price_columns: Optional[Sequence[str]] = None) -> pd.DataFrame:
    """Percent log returns 100 * (ln P_t - ln P_{t-1}) per price column, indexed by date

    Rows with any missing price are dropped (with a warning count). Raises
    DataFormatError naming the CSV line for an unparseable date or a non-positive or
    non-numeric price.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Price file not found: {path}")
    raw = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    if date_column not in raw.columns:
        raise ConfigError(f"Date column '{date_column}' not in {path.name}: {list(raw.columns)}")
    columns = list(price_columns) if price_columns else [c for c in raw.columns if c != date_column]
    missing = [c for c in columns if c not in raw.columns]
    if missing:
        raise ConfigError(f"Price columns {missing} not in {path.name}")
    if not columns:
        raise ConfigError(f"{path.name} has no price columns")

    dates = pd.to_datetime(raw[date_column].str.strip(), format="ISO8601", errors="coerce")
    bad = np.flatnonzero(dates.isna().to_numpy())
    if bad.size:
        row = _csv_line(int(bad[0]))
        raise DataFormatError(f"Unparseable date '{raw[date_column].iloc[bad[0]]}' on line {row} of {path.name}",
                              row=row)

    text = raw[columns].apply(lambda s: s.str.strip())
    empty = text.eq("") | text.isin(["NA", "NaN", "nan", "null"])
    prices = text.mask(empty)
    numeric = prices.apply(pd.to_numeric, errors="coerce")
    non_numeric = numeric.isna() & ~empty
    if non_numeric.to_numpy().any():
        pos = int(np.flatnonzero(non_numeric.any(axis=1).to_numpy())[0])
        row = _csv_line(pos)
        raise DataFormatError(f"Non-numeric price on line {row} of {path.name}", row=row)

    keep = ~numeric.isna().any(axis=1)
    dropped = int((~keep).sum())
    if dropped:
        logger.warning(f"Dropped {dropped} rows with missing prices from {path.name}")
    non_positive = (numeric <= 0).any(axis=1) & keep
    if non_positive.to_numpy().any():
        row = _csv_line(int(np.flatnonzero(non_positive.to_numpy())[0]))
        raise DataFormatError(f"Non-positive price on line {row} of {path.name}", row=row)

    numeric = numeric[keep].astype(np.float64)
    numeric.index = pd.DatetimeIndex(dates[keep].to_numpy(), name=DATE_COLUMN)
    if len(numeric) < 2:
        raise DataFormatError(f"{path.name} needs at least two complete price rows")
    returns = 100.0 * np.log(numeric).diff().iloc[1:]
    logger.info(f"Ingested {len(returns)} returns for {len(columns)} series from {path.name}")
    return returns


def export_returns(frame: pd.DataFrame, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    out = frame.copy()
    out.index.name = DATE_COLUMN
    out.to_csv(path, lineterminator="\n", encoding="utf-8")
    return path


def load_returns(path: Path, date_column: str = DATE_COLUMN) -> pd.DataFrame:
    """Read a frame written by export_returns; floats round-trip exactly"""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Returns file not found: {path}")
    frame = pd.read_csv(path, float_precision="round_trip", encoding="utf-8")
    if date_column not in frame.columns:
        raise ConfigError(f"Date column '{date_column}' not in {path.name}")
    frame.index = pd.DatetimeIndex(pd.to_datetime(frame.pop(date_column), format="ISO8601"),
                                   name=DATE_COLUMN)
    return frame.astype(np.float64)
