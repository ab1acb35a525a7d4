"""Result files: results.csv, verdict.json and plotdata/*.csv."""

from __future__ import annotations

import json
import math
from logging import getLogger
from pathlib import Path

import numpy as np
import pandas as pd

from .sweep import RESULT_COLUMNS, SweepResult, plot_rows

logger = getLogger(__name__)


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if hasattr(value, "value") and isinstance(getattr(value, "value"), str):
        return value.value
    return value


def write_json(data: dict, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_jsonable(data), f, indent=2)
    return path


def results_frame(results: list[SweepResult], labels: list[str] | None = None) -> pd.DataFrame:
    """Sweep rows as a frame; several sweeps get a leading ``series`` column."""
    frames = []
    for k, result in enumerate(results):
        frame = pd.DataFrame([row.record() for row in result.rows], columns=RESULT_COLUMNS)
        if labels is not None:
            frame.insert(0, "series", labels[k])
        frames.append(frame)
    if not frames:
        return pd.DataFrame(columns=RESULT_COLUMNS)
    return pd.concat(frames, ignore_index=True)


def write_sweep_outputs(
    out: str | Path,
    results: list[SweepResult],
    verdict: dict,
    labels: list[str] | None = None,
) -> Path:
    """Write the standard result files for one or more sweeps."""
    out = Path(out)
    plotdata = out / "plotdata"
    plotdata.mkdir(parents=True, exist_ok=True)

    results_frame(results, labels).to_csv(out / "results.csv", index=False)
    write_json(verdict, out / "verdict.json")

    for k, result in enumerate(results):
        suffix = f"_{labels[k]}" if labels is not None else ""
        for name, rows in plot_rows(result).items():
            pd.DataFrame(rows).to_csv(plotdata / f"{name}{suffix}.csv", index=False)
    logger.info(f"Results written to {out}")
    return out


def write_table(rows: list[dict], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(rows).to_csv(path, index=False)
    return path
