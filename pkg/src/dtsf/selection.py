"""Hyperparameter choice by previous-period error, and walk-forward
backtesting against the naive baseline."""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import AllConfigsFailed, DTSFError
from .forecast import HyperParams, forecast, forecast_from_scan
from .metrics import evaluate, mae, naive_forecast
from .scan import scan
from .series import TimeSeries, as_values

__all__ = ["Grid", "ConfigScore", "holdout_select", "BacktestRow", "EvaluationReport",
           "backtest"]


@dataclass(frozen=True)
class Grid:
    """Cartesian search space; the defaults give 5 * 4 * 3 = 60 configurations."""

    windows: tuple = (24, 48, 72, 96, 120)
    degrees: tuple = (1, 2, 3, 4)
    match_counts: tuple = (15, 25, 50)
    aggregator: str = "median"

    def __post_init__(self):
        for name in ("windows", "degrees", "match_counts"):
            vals = tuple(int(v) for v in getattr(self, name))
            if not vals:
                raise ValueError(f"grid {name} must not be empty")
            object.__setattr__(self, name, vals)

    def __len__(self):
        return len(self.windows) * len(self.degrees) * len(self.match_counts)

    def __iter__(self):
        """Configurations in (w, degree, m) order, which is also the tie-break order."""
        for w, d, m in itertools.product(sorted(self.windows), sorted(self.degrees),
                                         sorted(self.match_counts)):
            yield HyperParams(w=w, degree=d, m=m, aggregator=self.aggregator)


@dataclass(frozen=True)
class ConfigScore:
    params: HyperParams
    mae: float
    error: Optional[str] = None


def _score_group(train, actual, w, degree, configs, h, method):
    if h > w:
        return [ConfigScore(p, math.inf, f"horizon {h} exceeds window {w}") for p in configs]
    try:
        scanned = scan(train, w, h, degree, method=method)
    except DTSFError as exc:
        return [ConfigScore(p, math.inf, f"{type(exc).__name__}: {exc}") for p in configs]
    rows = []
    for p in configs:
        try:
            res = forecast_from_scan(train, scanned, p, h)
            err = mae(actual, res.point)
            rows.append(ConfigScore(p, err if np.isfinite(err) else math.inf))
        except DTSFError as exc:
            rows.append(ConfigScore(p, math.inf, f"{type(exc).__name__}: {exc}"))
    return rows


def holdout_select(ts, grid: Grid, h: int, *, method: str = "fast", n_jobs: int = 1):
    """Pick the configuration with the lowest MAE on the last ``h`` values.

    Each configuration forecasts the final ``h`` observations from the
    series truncated just before them. Failing configurations score
    ``inf``. Ties go to the smaller window, then degree, then match count.

    Returns
    -------
    (HyperParams, list of ConfigScore)
        The winner and one score row per grid point, in grid order.
    """
    vals = as_values(ts)
    if h < 1 or vals.size <= h:
        raise ValueError(f"horizon {h} leaves no training data")
    train, actual = vals[:-h], vals[-h:]

    configs = list(grid)
    groups: dict = {}
    for p in configs:
        groups.setdefault((p.w, p.degree), []).append(p)
    jobs = list(groups.items())

    def work(item):
        (w, d), ps = item
        return _score_group(train, actual, w, d, ps, h, method)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            parts = list(pool.map(work, jobs))
    else:
        parts = [work(j) for j in jobs]
    by_params = {row.params: row for part in parts for row in part}
    table = [by_params[p] for p in configs]

    best = min(table, key=lambda r: (r.mae, r.params.w, r.params.degree, r.params.m))
    if not math.isfinite(best.mae):
        raise AllConfigsFailed(f"all {len(table)} configurations failed "
                               f"(first: {table[0].error})")
    return best.params, table


@dataclass
class BacktestRow:
    index: int
    method: str
    timestamp: Optional[str] = None
    mae: float = math.nan
    rmse: float = math.nan
    smape: float = math.nan
    mf: float = math.nan
    seconds: Optional[float] = None
    params: Optional[dict] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


METRIC_NAMES = ("mae", "rmse", "smape", "mf")


@dataclass
class EvaluationReport:
    rows: list = field(default_factory=list)
    h: int = 0
    seconds: Optional[float] = None

    def methods(self) -> list:
        seen = []
        for r in self.rows:
            if r.method not in seen:
                seen.append(r.method)
        return seen

    def aggregate(self) -> dict:
        """Mean of every metric per method, over the successful points."""
        out = {}
        for meth in self.methods():
            good = [r for r in self.rows if r.method == meth and r.ok]
            agg = {name: (float(np.mean([getattr(r, name) for r in good])) if good else math.nan)
                   for name in METRIC_NAMES}
            agg["n"] = len(good)
            agg["failed"] = sum(1 for r in self.rows if r.method == meth and not r.ok)
            secs = [r.seconds for r in good if r.seconds is not None]
            agg["seconds"] = float(np.mean(secs)) if secs else None
            out[meth] = agg
        return out

    def to_dict(self) -> dict:
        rows = []
        for r in self.rows:
            d = {"index": r.index, "timestamp": r.timestamp, "method": r.method}
            d.update({name: _finite_or_none(getattr(r, name)) for name in METRIC_NAMES})
            if r.seconds is not None:
                d["seconds"] = r.seconds
            d["params"] = r.params
            d["error"] = r.error
            rows.append(d)
        agg = {meth: {k: _finite_or_none(v) for k, v in vals.items()}
               for meth, vals in self.aggregate().items()}
        out = {"horizon": self.h, "rows": rows, "aggregate": agg}
        if self.seconds is not None:
            out["seconds"] = self.seconds
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self) -> str:
        """One row per (point, method), then one ``mean`` row per method."""
        timing = any(r.seconds is not None for r in self.rows)
        cols = ["index", "timestamp", "method", *METRIC_NAMES]
        if timing:
            cols.append("seconds")
        cols += ["w", "degree", "m", "error"]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(cols)
        for r in self.rows:
            p = r.params or {}
            row = [r.index, r.timestamp or "", r.method,
                   *(_csv_num(getattr(r, n)) for n in METRIC_NAMES)]
            if timing:
                row.append(_csv_num(r.seconds))
            row += [p.get("w", ""), p.get("degree", ""), p.get("m", ""), r.error or ""]
            writer.writerow(row)
        for meth, agg in self.aggregate().items():
            row = ["mean", "", meth, *(_csv_num(agg[n]) for n in METRIC_NAMES)]
            if timing:
                row.append(_csv_num(agg["seconds"]))
            row += ["", "", "", ""]
            writer.writerow(row)
        return buf.getvalue()


def _finite_or_none(v):
    if v is None:
        return None
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _csv_num(v):
    v = _finite_or_none(v)
    return "" if v is None else repr(v)


def backtest(ts, eval_points: Sequence[int], grid: Grid, h: int, *, with_naive: bool = True,
             timing: bool = True, method: str = "fast", n_jobs: int = 1) -> EvaluationReport:
    """Walk-forward evaluation at each origin in ``eval_points``.

    At origin ``p`` only ``values[:p]`` is visible: the configuration is
    chosen by :func:`holdout_select` on that history, then ``h`` steps are
    forecast and scored against ``values[p:p+h]``. Per-point failures are
    recorded in the report rather than raised.
    """
    vals = as_values(ts)
    stamps = ts if isinstance(ts, TimeSeries) else None
    report = EvaluationReport(h=h)
    t_all = time.perf_counter()
    for p in eval_points:
        p = int(p)
        stamp = stamps.timestamp(p).isoformat() if stamps is not None else None
        methods = ["dtsf", "naive"] if with_naive else ["dtsf"]
        if p < h or p + h > vals.size:
            msg = f"eval point {p} needs {h} <= p <= {vals.size - h}"
            report.rows.extend(BacktestRow(p, meth, stamp, error=msg) for meth in methods)
            continue
        history, actual = vals[:p], vals[p:p + h]

        row = BacktestRow(p, "dtsf", stamp)
        t0 = time.perf_counter()
        try:
            params, _ = holdout_select(history, grid, h, method=method, n_jobs=n_jobs)
            row.params = params.as_dict()
            pred = forecast(history, params, h, method=method).point
            _fill(row, actual, pred)
        except DTSFError as exc:
            row.error = f"{type(exc).__name__}: {exc}"
        if timing:
            row.seconds = time.perf_counter() - t0
        report.rows.append(row)

        if with_naive:
            row = BacktestRow(p, "naive", stamp)
            t0 = time.perf_counter()
            try:
                _fill(row, actual, naive_forecast(history, h))
            except DTSFError as exc:
                row.error = f"{type(exc).__name__}: {exc}"
            if timing:
                row.seconds = time.perf_counter() - t0
            report.rows.append(row)
    if timing:
        report.seconds = time.perf_counter() - t_all
    return report


def _fill(row: BacktestRow, actual, pred) -> None:
    rep = evaluate(actual, pred)
    row.mae, row.rmse, row.smape, row.mf = rep.mae, rep.rmse, rep.smape, rep.mf
