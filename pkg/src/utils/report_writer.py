"""
Report Writer - JSON reports and CSV artifacts in the output directory
"""

import json
import logging
import shutil
import tempfile
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)


def to_jsonable(value: Any) -> Any:
    """json.dump default hook for numpy scalars, arrays and pandas objects"""
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return None if not np.isfinite(value) else float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (pd.Series, pd.Index)):
        return value.tolist()
    if isinstance(value, (pd.Timestamp, Path)):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def _finite(value: Any) -> Any:
    if isinstance(value, float):
        return value if np.isfinite(value) else None
    if isinstance(value, dict):
        return {str(k): _finite(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite(v) for v in value]
    return value


def write_json(path: Path, data: Dict) -> Path:
    """Write JSON with atomic write (temp file + rename); NaN and Inf become null"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with tempfile.NamedTemporaryFile(mode='w', suffix='.json', delete=False,
                                     dir=path.parent, encoding='utf-8') as tmp_file:
        json.dump(_finite(data), tmp_file, indent=2, sort_keys=True, default=to_jsonable,
                  allow_nan=False)
        tmp_file.write("\n")
        tmp_path = tmp_file.name
    shutil.move(tmp_path, path)
    return path


def write_csv(path: Path, frame: pd.DataFrame, columns: Optional[Sequence[str]] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if columns is not None:
        frame = frame.loc[:, list(columns)]
    frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
    return path


class ReportWriter:
    """Writes the artifacts of one run into its output directory"""

    def __init__(self, output_dir: Path):
        self.output_dir = Path(output_dir)
        self.written: List[Path] = []

    def json(self, name: str, data: Dict) -> Path:
        path = write_json(self.output_dir / name, data)
        self.written.append(path)
        logger.info(f"Wrote {path}")
        return path

    def csv(self, name: str, frame: pd.DataFrame, columns: Optional[Sequence[str]] = None) -> Path:
        path = write_csv(self.output_dir / name, frame, columns)
        self.written.append(path)
        logger.info(f"Wrote {path} ({len(frame)} rows)")
        return path

    def artifacts(self) -> List[str]:
        return [p.name for p in self.written]
