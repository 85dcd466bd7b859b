"""
Machine-readable outputs and Monte Carlo summaries.

Machine outputs print floats with 17 significant digits so that values
round-trip exactly; human summaries are rounded to 4 decimals.
"""

import json
from pathlib import Path
from typing import Iterable, Mapping, Sequence, Union

import numpy as np
import pandas as pd

from .logger import log_debug

PathLike = Union[str, Path]
FLOAT_FORMAT = "%.17g"


def write_csv(frame: pd.DataFrame, path: PathLike) -> Path:
    """Write a frame without index, 17-digit floats, LF line endings."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n", encoding="utf-8")
    log_debug(f"Wrote {len(frame)} rows to {path}")
    return path


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        return _jsonable(value.item())
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


def to_json(obj) -> str:
    """
    Serialize to JSON.

    Floats use Python's shortest round-trip repr, which never needs more
    than 17 significant digits; non-finite floats become null.
    """
    return json.dumps(_jsonable(obj), indent=2, sort_keys=False)


def write_json(obj, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(to_json(obj) + "\n", encoding="utf-8")
    return path


def trace_frame(trace: Iterable) -> pd.DataFrame:
    """Per-iteration fitter trace as columns iter,f_n,g_n,lambda_diff."""
    rows = [(t.iteration, t.f_n, t.g_n, t.lambda_diff) for t in trace]
    return pd.DataFrame(rows, columns=["iter", "f_n", "g_n", "lambda_diff"])


def summarize_estimates(
    frame: pd.DataFrame,
    truth: Mapping[str, float],
    by: Sequence[str] = ("kind", "sigma1", "estimand", "method"),
) -> pd.DataFrame:
    """
    Median, IQR, bias and RMSE of `point` per cell.

    Args:
        frame: long-format estimates with an `estimand` column
        truth: true value per estimand name
        by: grouping columns
    """
    if frame.empty:
        return pd.DataFrame(columns=[*by, "reps", "median", "iqr", "bias", "rmse"])
    errors = frame["point"] - frame["estimand"].map(truth)
    work = frame.assign(error=errors)
    rows = []
    for keys, group in work.groupby(list(by), sort=False):
        points = group["point"].to_numpy()
        err = group["error"].to_numpy()
        q25, q75 = np.percentile(points, [25, 75])
        rows.append((*keys, len(points), float(np.median(points)), float(q75 - q25),
                     float(err.mean()), float(np.sqrt(np.mean(err ** 2)))))
    return pd.DataFrame(rows, columns=[*by, "reps", "median", "iqr", "bias", "rmse"])


def compare_fitters(summary: pd.DataFrame, by: Sequence[str] = ("kind", "sigma1", "estimand", "method")) -> pd.DataFrame:
    """Side-by-side bias and RMSE per cell, one column pair per fitter."""
    wide = summary.pivot_table(index=list(by), columns="fitter", values=["bias", "rmse"], sort=False)
    wide.columns = [f"{stat}_{fitter}" for stat, fitter in wide.columns]
    return wide.reset_index()


def human_table(frame: pd.DataFrame) -> str:
    """Fixed-width text rendering with 4-decimal floats."""
    return frame.to_string(index=False, float_format=lambda v: f"{v:.4f}")
