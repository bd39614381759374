"""CSV ingestion and preprocessing for real multi-response datasets.

Steps run in the order listed in :class:`PipelineConfig`; the available
steps are ``impute_locf``, ``log_transform``, ``first_difference`` and
``standardize``. Splits are chronological: the first rows train, the rest test.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from lrps.exceptions import ConfigError, PipelineError

STEPS = ("impute_locf", "log_transform", "first_difference", "standardize")
#: Differencing then standardising, with last-observation imputation first.
AIR_QUALITY_STEPS = ("impute_locf", "first_difference", "standardize")
#: Log transform only.
GENE_EXPRESSION_STEPS = ("log_transform",)


@dataclass(frozen=True)
class Dataset:
    """Covariates ``X`` and outcomes ``Y`` with column labels; NaN marks a missing cell."""

    X: np.ndarray
    Y: np.ndarray
    x_names: tuple
    y_names: tuple
    ordered: bool = True

    def __post_init__(self):
        if self.X.shape[0] != self.Y.shape[0]:
            raise ValueError("X and Y row counts differ")
        if self.X.shape[1] != len(self.x_names) or self.Y.shape[1] != len(self.y_names):
            raise ValueError("label counts do not match column counts")

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def names(self):
        return self.x_names + self.y_names

    def combined(self):
        return np.hstack([self.X, self.Y])

    def _with(self, combined):
        p = self.X.shape[1]
        return replace(self, X=combined[:, :p], Y=combined[:, p:])

    def head(self, count):
        return replace(self, X=self.X[:count], Y=self.Y[:count])

    def tail(self, start):
        return replace(self, X=self.X[start:], Y=self.Y[start:])

    def has_missing(self):
        return bool(np.isnan(self.X).any() or np.isnan(self.Y).any())


def load_csv(path, x_columns, y_columns):
    """Read the named columns of a headed CSV; empty cells become NaN.

    Raises
    ------
    ConfigError
        A requested column is not in the header.
    PipelineError
        A non-empty cell does not parse as a number (row and column reported).
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PipelineError("load_csv", f"{path} is empty") from None
        header = [h.strip() for h in header]
        for field, columns in (("x_columns", x_columns), ("y_columns", y_columns)):
            if not columns:
                raise ConfigError(field, "no columns selected")
            for name in columns:
                if name not in header:
                    raise ConfigError(field, f"column {name!r} not found in {path.name}")
        wanted = list(x_columns) + list(y_columns)
        index = [header.index(name) for name in wanted]
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            values = []
            for name, i in zip(wanted, index):
                cell = row[i].strip() if i < len(row) else ""
                if cell == "":
                    values.append(math.nan)
                    continue
                try:
                    values.append(float(cell))
                except ValueError:
                    raise PipelineError(
                        "load_csv", f"non-numeric cell {cell!r} at line {line_no}, column {name!r}"
                    ) from None
            rows.append(values)
    if not rows:
        raise PipelineError("load_csv", f"{path} has no data rows")
    data = np.array(rows, dtype=np.float64)
    p = len(x_columns)
    return Dataset(data[:, :p], data[:, p:], tuple(x_columns), tuple(y_columns))


def write_csv(dataset, path):
    """Write ``dataset`` with a header; NaN is written as an empty cell."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(dataset.names)
        for row in dataset.combined():
            w.writerow(["" if math.isnan(v) else repr(float(v)) for v in row])


def _require_complete(d, step):
    if d.has_missing():
        raise PipelineError(step, "missing values present; run impute_locf first")


def impute_locf(d):
    """Carry the last observed value forward; leading gaps take the first later value."""
    data = d.combined()
    missing = np.isnan(data)
    if not missing.any():
        return d
    empty = missing.all(axis=0)
    if empty.any():
        names = [d.names[i] for i in np.flatnonzero(empty)]
        raise PipelineError("impute_locf", f"column(s) entirely missing: {names}")
    n = data.shape[0]
    rows = np.where(missing, 0, np.arange(n)[:, None])
    np.maximum.accumulate(rows, axis=0, out=rows)
    filled = np.take_along_axis(data, rows, axis=0)
    # leading gaps: still NaN after the forward pass
    first_valid = np.argmax(~missing, axis=0)
    lead = np.isnan(filled)
    filled[lead] = np.broadcast_to(data[first_valid, np.arange(data.shape[1])], data.shape)[lead]
    return d._with(filled)


def first_difference(d):
    """Row t becomes ``row[t+1] - row[t]``; one row shorter."""
    if d.n < 2:
        raise PipelineError("first_difference", f"need at least 2 rows, got {d.n}")
    _require_complete(d, "first_difference")
    return d._with(np.diff(d.combined(), axis=0))


@dataclass(frozen=True)
class StandardizationStats:
    """Column means and sample standard deviations (divisor n - 1) used for scaling."""

    mean: np.ndarray
    sd: np.ndarray
    rows_used: int


def standardize(d, stats_from="all"):
    """Centre and scale every column to mean 0, sd 1.

    ``stats_from`` is ``"all"`` or an integer row count; with a count the
    statistics come from the first ``stats_from`` rows only and are applied to
    every row.
    """
    _require_complete(d, "standardize")
    data = d.combined()
    if stats_from == "all":
        window = data
    else:
        count = int(stats_from)
        if not 2 <= count <= d.n:
            raise PipelineError("standardize", f"statistics window {count} outside 2..{d.n}")
        window = data[:count]
    mean = window.mean(axis=0)
    sd = window.std(axis=0, ddof=1)
    zero = sd == 0
    if zero.any():
        names = [d.names[i] for i in np.flatnonzero(zero)]
        raise PipelineError("standardize", f"zero standard deviation in column(s) {names}")
    stats = StandardizationStats(mean=mean, sd=sd, rows_used=window.shape[0])
    return d._with((data - mean) / sd), stats


def log_transform(d):
    """Natural log of every observed value; values must be positive."""
    data = d.combined()
    bad = ~np.isnan(data) & (data <= 0)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise PipelineError(
            "log_transform", f"non-positive value {data[r, c]!r} at row {r + 1}, column {d.names[c]!r}"
        )
    with np.errstate(invalid="ignore"):
        return d._with(np.log(data))


def resolve_train_count(n, train):
    """Training rows for a fraction in (0, 1) (rounded) or an explicit count."""
    if isinstance(train, float):
        if not 0.0 < train < 1.0:
            raise ConfigError("split", f"train fraction must lie in (0, 1), got {train}")
        count = int(round(train * n))
    elif isinstance(train, (int, np.integer)) and not isinstance(train, bool):
        count = int(train)
    else:
        raise ConfigError("split", f"expected a fraction or a row count, got {train!r}")
    if not 1 <= count < n:
        raise ConfigError("split", f"train count {count} must lie in 1..{n - 1}")
    return count


def chrono_split(d, train):
    """First ``train`` rows (count or fraction) versus the rest, order preserved."""
    count = resolve_train_count(d.n, train)
    return d.head(count), d.tail(count)


@dataclass(frozen=True)
class PipelineConfig:
    steps: tuple = AIR_QUALITY_STEPS
    train: float = 0.8
    standardize_stats: str = "all"

    def __post_init__(self):
        for step in self.steps:
            if step not in STEPS:
                raise ConfigError("pipeline.steps", f"unknown step {step!r}; expected {STEPS}")
        if self.standardize_stats not in ("all", "train"):
            raise ConfigError(
                "pipeline.standardize_stats", f"expected 'all' or 'train', got {self.standardize_stats!r}"
            )

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        split = d.pop("split", {}) or {}
        train = split.get("train_count", split.get("train_fraction", 0.8))
        if "train_count" in split and "train_fraction" in split:
            raise ConfigError("split", "give train_count or train_fraction, not both")
        if "train_count" in split:
            train = int(train)
        return cls(
            steps=tuple(d.get("steps", AIR_QUALITY_STEPS)),
            train=train,
            standardize_stats=d.get("standardize_stats", "all"),
        )

    def to_dict(self):
        key = "train_count" if isinstance(self.train, int) else "train_fraction"
        return {"steps": list(self.steps), "split": {key: self.train}, "standardize_stats": self.standardize_stats}


@dataclass(frozen=True)
class PipelineResult:
    full: Dataset
    train: Dataset
    test: Dataset
    stats: StandardizationStats | None


def run_pipeline(d, config):
    """Apply ``config.steps`` in order, then split chronologically."""
    stats = None
    for step in config.steps:
        if step == "impute_locf":
            d = impute_locf(d)
        elif step == "log_transform":
            d = log_transform(d)
        elif step == "first_difference":
            d = first_difference(d)
        elif step == "standardize":
            window = "all"
            if config.standardize_stats == "train":
                window = resolve_train_count(d.n, config.train)
            d, stats = standardize(d, window)
    if d.has_missing():
        raise PipelineError("pipeline", "missing values remain after the last step; add impute_locf")
    train, test = chrono_split(d, config.train)
    return PipelineResult(full=d, train=train, test=test, stats=stats)
