"""Time-series container, CSV ingestion and block aggregation.

All algorithms in the package work on integer positions; timestamps are
carried along only so results can be reported in calendar time.
"""

from __future__ import annotations

import csv
import io
import math
import os
import re
from collections import Counter
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from typing import BinaryIO, TextIO, Union

import numpy as np

from .errors import EmptySeries, IngestError, IrregularSpacing, MalformedRecord

__all__ = [
    "TimeSeries",
    "SeriesSummary",
    "load_csv",
    "aggregate",
    "summary_stats",
    "as_values",
    "parse_timestamp",
]

EPOCH = datetime(1970, 1, 1)

Column = Union[int, str]
Source = Union[str, "os.PathLike[str]", bytes, BinaryIO, TextIO]

_INT_RE = re.compile(r"[+-]?\d+")


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Uniformly spaced univariate observations.

    ``values`` is copied into a read-only float64 array so instances can be
    shared freely between threads.
    """

    values: np.ndarray
    start_time: datetime
    step: timedelta

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64, copy=True).reshape(-1)
        if vals.size == 0:
            raise EmptySeries()
        if not np.all(np.isfinite(vals)):
            bad = int(np.flatnonzero(~np.isfinite(vals))[0])
            raise ValueError(f"non-finite value at index {bad}")
        if self.step <= timedelta(0):
            raise ValueError("step must be strictly positive")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_values(cls, values, step: timedelta = timedelta(seconds=1),
                    start_time: datetime = EPOCH) -> "TimeSeries":
        return cls(np.asarray(values, dtype=np.float64), start_time, step)

    def __len__(self) -> int:
        return self.values.size

    def timestamp(self, index: int) -> datetime:
        """Timestamp of position ``index`` (may lie beyond the last observation)."""
        return self.start_time + index * self.step

    @property
    def end_time(self) -> datetime:
        return self.timestamp(len(self) - 1)

    def index_of(self, when: datetime) -> int:
        """Position of the first observation at or after ``when``."""
        offset = (when - self.start_time) / self.step
        return max(0, math.ceil(offset))

    def __eq__(self, other):
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return (self.start_time == other.start_time and self.step == other.step
                and np.array_equal(self.values, other.values))

    def __repr__(self):
        return (f"TimeSeries(len={len(self)}, start_time={self.start_time.isoformat()}, "
                f"step={self.step})")


@dataclass(frozen=True)
class SeriesSummary:
    mean: float
    sd: float
    min: float
    max: float
    length: int


def as_values(ts) -> np.ndarray:
    """Return the observations of ``ts`` as a 1-D float64 array.

    Accepts a :class:`TimeSeries` or any array-like of finite numbers.
    """
    if isinstance(ts, TimeSeries):
        return ts.values
    vals = np.asarray(ts, dtype=np.float64)
    if vals.ndim != 1:
        raise ValueError("expected a one-dimensional series")
    if not np.all(np.isfinite(vals)):
        raise ValueError("series contains non-finite values")
    return vals


def parse_timestamp(text: str) -> datetime:
    """Parse an ISO-8601 timestamp or integer epoch seconds.

    Offset-aware values are converted to UTC and returned naive, so every
    timestamp in a series is comparable.
    """
    text = text.strip()
    if _INT_RE.fullmatch(text):
        return EPOCH + timedelta(seconds=int(text))
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is not None:
        dt = dt.astimezone(timezone.utc).replace(tzinfo=None)
    return dt


def _open_text(source: Source, encoding: str) -> TextIO:
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode(encoding))
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            return io.StringIO(fh.read().decode(encoding))
    data = source.read()
    if isinstance(data, bytes):
        data = data.decode(encoding)
    return io.StringIO(data)


def _resolve_column(col: Column, header: list[str] | None) -> int:
    if isinstance(col, int):
        return col
    if header is None:
        raise IngestError(f"column {col!r} given by name but the input has no header")
    names = [h.strip() for h in header]
    if col not in names:
        raise IngestError(f"column {col!r} not found in header {names}")
    return names.index(col)


def _parse_value(text: str) -> float | None:
    text = text.strip()
    if text == "":
        return None
    val = float(text)
    if math.isnan(val):
        return None
    return val


def load_csv(source: Source, timestamp_col: Column = 0, value_col: Column = 1, *,
             delimiter: str = ",", header: bool | None = None,
             step: timedelta | None = None, interpolate: bool = False,
             encoding: str = "utf-8") -> TimeSeries:
    """Read a two-column (timestamp, value) series from delimited text.

    Parameters
    ----------
    source : path, bytes or file object
        UTF-8 text, one record per line.
    timestamp_col, value_col : int or str
        Zero-based column indices, or header names.
    header : bool, optional
        Whether the first row is a header. ``None`` guesses: a first row whose
        timestamp field does not parse is treated as a header.
    step : timedelta, optional
        Expected spacing. When omitted, the most frequent gap is used.
    interpolate : bool
        Fill interior single-point missing values by linear interpolation
        instead of rejecting them.

    Raises
    ------
    MalformedRecord
        A row cannot be parsed, or a value is missing and cannot be filled.
    IrregularSpacing
        Some gap between consecutive (sorted) timestamps differs from ``step``.
    EmptySeries
        No data rows.
    """
    text = _open_text(source, encoding)
    reader = csv.reader(text, delimiter=delimiter)
    rows: list[tuple[int, list[str]]] = []
    for fields in reader:
        if not fields or all(f.strip() == "" for f in fields):
            continue
        rows.append((reader.line_num, fields))
    if not rows:
        raise EmptySeries("input contains no records")

    if header is None:
        if isinstance(timestamp_col, str) or isinstance(value_col, str):
            header = True
        else:
            first = rows[0][1]
            try:
                parse_timestamp(first[timestamp_col])
                header = False
            except (ValueError, IndexError):
                header = True
    header_row = rows.pop(0)[1] if header else None
    ti = _resolve_column(timestamp_col, header_row)
    vi = _resolve_column(value_col, header_row)

    records: list[tuple[datetime, float | None, int]] = []
    for line, fields in rows:
        try:
            when = parse_timestamp(fields[ti])
        except IndexError:
            raise MalformedRecord(line, "missing timestamp column") from None
        except ValueError:
            raise MalformedRecord(line, f"bad timestamp {fields[ti]!r}") from None
        try:
            val = _parse_value(fields[vi])
        except IndexError:
            raise MalformedRecord(line, "missing value column") from None
        except ValueError:
            raise MalformedRecord(line, f"bad value {fields[vi]!r}") from None
        if val is not None and math.isinf(val):
            raise MalformedRecord(line, "infinite value")
        if val is None and not interpolate:
            raise MalformedRecord(line, "missing value")
        records.append((when, val, line))
    if not records:
        raise EmptySeries("input contains no data rows")

    records.sort(key=lambda r: r[0])
    times = [r[0] for r in records]
    gaps = [b - a for a, b in zip(times, times[1:])]
    if step is None:
        if not gaps:
            raise IngestError("cannot infer the sampling step from a single observation")
        counts = Counter(gaps)
        top = max(counts.values())
        step = min(g for g, c in counts.items() if c == top)
    if step <= timedelta(0):
        raise IrregularSpacing(0, "non-positive step")
    for i, gap in enumerate(gaps, start=1):
        if gap != step:
            raise IrregularSpacing(i, f"gap {gap} != step {step}")

    values = [r[1] for r in records]
    for i, val in enumerate(values):
        if val is not None:
            continue
        interior = 0 < i < len(values) - 1
        if not interior or values[i - 1] is None or values[i + 1] is None:
            raise MalformedRecord(records[i][2], "missing value cannot be interpolated")
        values[i] = 0.5 * (values[i - 1] + values[i + 1])
    return TimeSeries(np.asarray(values, dtype=np.float64), times[0], step)


def aggregate(ts: TimeSeries, factor: int, reducer: str = "mean") -> TimeSeries:
    """Reduce consecutive disjoint blocks of ``factor`` observations.

    A trailing partial block is dropped. The output step is ``factor`` times
    the input step; the start time is unchanged.
    """
    if factor < 1:
        raise ValueError("factor must be >= 1")
    if reducer not in ("mean", "median"):
        raise ValueError(f"unknown reducer {reducer!r}")
    n = len(ts) // factor
    if n == 0:
        raise EmptySeries(f"series of length {len(ts)} is shorter than factor {factor}")
    if factor == 1:
        return ts
    blocks = ts.values[: n * factor].reshape(n, factor)
    reduced = blocks.mean(axis=1) if reducer == "mean" else np.median(blocks, axis=1)
    return TimeSeries(reduced, ts.start_time, ts.step * factor)


def summary_stats(ts) -> SeriesSummary:
    """Sample mean, sample standard deviation (n - 1), min, max and length."""
    vals = as_values(ts)
    n = vals.size
    sd = float(np.std(vals, ddof=1)) if n > 1 else float("nan")
    lo, hi = float(vals.min()), float(vals.max())
    # summation rounding can push the mean of a constant series past its bounds
    mean = min(max(float(np.mean(vals)), lo), hi)
    return SeriesSummary(mean=mean, sd=sd, min=lo, max=hi, length=int(n))
