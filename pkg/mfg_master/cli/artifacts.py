"""
Run Artifacts Module

This module writes the reproducible outputs of a run: CSV tables with
'#'-prefixed metadata lines and JSON reports with sorted keys and a schema
version. No timestamps are written, so equal runs give equal bytes.
"""

import csv
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence

import numpy as np

from mfg_master.utils.logger import get_logger

logger = get_logger(__name__)

SCHEMA_VERSION = "1"


def _plain(value: Any) -> Any:
    """JSON hook for numpy scalars, arrays and paths."""
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def _cell(value: Any) -> Any:
    """Empty for None, shortest round-trip text for floats."""
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return value


def write_csv(
    path: Path,
    columns: Sequence[str],
    rows: Iterable[Sequence[Any]],
    comments: Sequence[str] = (),
) -> Path:
    """
    Write a CSV table.

    Args:
        path (Path): Output file.
        columns (Sequence[str]): Column names.
        rows (Iterable[Sequence[Any]]): Table rows.
        comments (Sequence[str], optional): Metadata lines, written with a '# ' prefix.

    Returns:
        Path: The written file.
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        for line in comments:
            f.write(f"# {line}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(value) for value in row])
    logger.info(f"Wrote {path}")
    return path


def write_json(path: Path, report: Dict[str, Any]) -> Path:
    """
    Write a JSON report with sorted keys and the schema version.

    Args:
        path (Path): Output file.
        report (Dict[str, Any]): Report body.

    Returns:
        Path: The written file.
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    body = {"schema_version": SCHEMA_VERSION, **report}
    with open(path, "w") as f:
        f.write(json.dumps(body, sort_keys=True, indent=2, default=_plain))
        f.write("\n")
    logger.info(f"Wrote {path}")
    return path


def trajectory_rows(times: np.ndarray, nodes: np.ndarray, values: np.ndarray) -> List[List[float]]:
    """Long-format (t, x, value) rows of a trajectory of shape (times, cells)."""
    return [
        [float(t), float(x), float(values[k, i])]
        for k, t in enumerate(times)
        for i, x in enumerate(nodes)
    ]


def cauchy_table_rows(table: Dict[str, Any]) -> List[List[Any]]:
    """(N, E_N, order) rows of a Cauchy table; N is the finer value of each pair."""
    return [[row["n_high"], row["error"], row.get("order")] for row in table["rows"]]
