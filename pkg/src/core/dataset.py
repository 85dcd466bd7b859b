"""
MNAR dataset container, CSV I/O and sample splitting.

Rows are (x, y*r, r): the outcome is only meaningful when r = 1 and is
stored as 0 otherwise. On disk the header is ``x1,...,xd,y,r`` and the y
cell of a missing-outcome row may be empty.
"""

from __future__ import annotations
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple, Union

import numpy as np
import pandas as pd

from .errors import DataError
from ..utils.logger import log_debug, log_warning
from ..utils.numerics import make_rng

PathLike = Union[str, Path]


@dataclass(frozen=True)
class PiR:
    """Estimate n1/n of P(R = 1)."""
    value: float

    def __post_init__(self) -> None:
        if not 0.0 < self.value < 1.0:
            raise DataError(f"P(R=1) estimate must lie in (0, 1), got {self.value}")


@dataclass(frozen=True)
class MnarDataset:
    """
    Covariates, outcomes and observation indicators.

    Arrays are copied and frozen at construction so instances can be shared
    read-only across worker threads.
    """
    covariates: np.ndarray
    outcomes: np.ndarray
    r: np.ndarray

    def __post_init__(self) -> None:
        X = np.array(self.covariates, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.array(self.outcomes).reshape(-1)
        r = np.array(self.r).reshape(-1)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise DataError(f"covariates must be a non-empty n x d matrix, got shape {X.shape}")
        n = X.shape[0]
        if y.shape[0] != n or r.shape[0] != n:
            raise DataError(f"length mismatch: {n} covariate rows, {y.shape[0]} outcomes, {r.shape[0]} indicators")
        if not np.all(np.isfinite(X)):
            raise DataError("covariates must be finite")
        if not np.all(np.isin(r, (0, 1))):
            raise DataError("missingness indicators must be 0 or 1")
        if not np.all(np.isin(y, (0, 1))):
            raise DataError("outcomes must be 0 or 1")
        r = r.astype(np.int8)
        y = y.astype(np.int8)
        if np.any((r == 0) & (y != 0)):
            raise DataError("outcomes must be 0 on rows with r=0")
        for arr in (X, y, r):
            arr.setflags(write=False)
        object.__setattr__(self, "covariates", X)
        object.__setattr__(self, "outcomes", y)
        object.__setattr__(self, "r", r)

    @property
    def n(self) -> int:
        return int(self.covariates.shape[0])

    @property
    def d(self) -> int:
        return int(self.covariates.shape[1])

    @property
    def n1(self) -> int:
        return int(self.r.sum())

    @property
    def n0(self) -> int:
        return self.n - self.n1

    @property
    def observed(self) -> np.ndarray:
        return self.r == 1

    @property
    def missing(self) -> np.ndarray:
        return self.r == 0

    def pi_r(self) -> PiR:
        return PiR(self.n1 / self.n)

    def require_both_arms(self) -> None:
        if self.n1 < 1:
            raise DataError("no observed-outcome rows (r=1)")
        if self.n0 < 1:
            raise DataError("no missing-outcome rows (r=0)")

    def subset(self, indices: np.ndarray) -> MnarDataset:
        idx = np.asarray(indices, dtype=int)
        return MnarDataset(self.covariates[idx], self.outcomes[idx], self.r[idx])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MnarDataset):
            return NotImplemented
        return (
            np.array_equal(self.covariates, other.covariates)
            and np.array_equal(self.outcomes, other.outcomes)
            and np.array_equal(self.r, other.r)
        )


def _parse_binary(cell: str, name: str, line: int) -> int:
    try:
        value = float(cell)
    except ValueError:
        raise DataError(f"{name}={cell!r} is not 0 or 1", line) from None
    if value not in (0.0, 1.0):
        raise DataError(f"{name}={cell!r} is not 0 or 1", line)
    return int(value)


def load_csv(path: PathLike, strict: bool = True) -> MnarDataset:
    """
    Read a dataset from ``x1,...,xd,y,r`` CSV.

    Args:
        path: CSV file
        strict: reject rows carrying an outcome with r=0; when False such
            outcomes are zeroed with a warning

    Raises:
        DataError: malformed content, reported with its line number
        OSError: file cannot be read
    """
    path = Path(path)
    try:
        frame = pd.read_csv(
            path, dtype=str, keep_default_na=False, skip_blank_lines=False, encoding="utf-8"
        )
    except pd.errors.EmptyDataError:
        raise DataError(f"{path}: missing header row") from None
    except pd.errors.ParserError as e:
        raise DataError(f"{path}: malformed row: {e}") from None

    columns = [c.strip() for c in frame.columns]
    d = len(columns) - 2
    expected = [f"x{j}" for j in range(1, d + 1)] + ["y", "r"]
    if d < 1 or columns != expected:
        raise DataError(f"{path}: header must be x1,...,xd,y,r, got {','.join(columns)}", 1)
    if frame.empty:
        raise DataError(f"{path}: no data rows")

    X = np.empty((len(frame), d))
    y = np.zeros(len(frame), dtype=np.int8)
    r = np.zeros(len(frame), dtype=np.int8)
    repaired = 0
    for i, row in enumerate(frame.itertuples(index=False, name=None)):
        line = i + 2
        if any(pd.isna(cell) for cell in row):
            raise DataError(f"malformed row: expected {d + 2} fields", line)
        cells = [cell.strip() for cell in row]
        for j in range(d):
            try:
                value = float(cells[j])
            except ValueError:
                raise DataError(f"covariate x{j + 1}={cells[j]!r} is not a number", line) from None
            if not math.isfinite(value):
                raise DataError(f"non-finite covariate x{j + 1}={cells[j]!r}", line)
            X[i, j] = value
        r[i] = _parse_binary(cells[d + 1], "r", line)
        y_cell = cells[d]
        if y_cell == "":
            if r[i] == 1:
                raise DataError("outcome is empty while r=1", line)
            continue
        y_value = _parse_binary(y_cell, "y", line)
        if r[i] == 0 and y_value == 1:
            if strict:
                raise DataError("observed outcome with r=0", line)
            log_warning(f"{path} line {line}: observed outcome with r=0 set to 0")
            repaired += 1
            y_value = 0
        y[i] = y_value

    log_debug(f"Loaded {len(frame)} rows x {d} covariates from {path} ({repaired} repaired)")
    return MnarDataset(X, y, r)


def save_csv(dataset: MnarDataset, path: PathLike) -> None:
    """Write a dataset as CSV with 17 significant digits (bit-exact round trip)."""
    columns = {f"x{j + 1}": [f"{v:.17g}" for v in dataset.covariates[:, j]] for j in range(dataset.d)}
    columns["y"] = [str(int(v)) if rv == 1 else "" for v, rv in zip(dataset.outcomes, dataset.r)]
    columns["r"] = [str(int(v)) for v in dataset.r]
    pd.DataFrame(columns).to_csv(Path(path), index=False, lineterminator="\n", encoding="utf-8")


def split_dataset(dataset: MnarDataset, fraction: float, seed: int) -> Tuple[MnarDataset, MnarDataset]:
    """
    Uniform random partition into (first, second) parts.

    The first part gets floor(fraction * n) rows, clamped so both parts are
    non-empty. Row order inside each part follows the original order.
    """
    if not 0.0 < fraction < 1.0:
        raise DataError(f"split fraction must lie in (0, 1), got {fraction}")
    n = dataset.n
    if n < 2:
        raise DataError(f"cannot split {n} row(s) into two non-empty parts")
    n_first = min(max(int(math.floor(fraction * n)), 1), n - 1)
    perm = make_rng(seed).permutation(n)
    first = np.sort(perm[:n_first])
    second = np.sort(perm[n_first:])
    return dataset.subset(first), dataset.subset(second)
