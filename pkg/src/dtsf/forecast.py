"""Turn selected matches into point forecasts and prediction intervals."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .scan import MAX_DEGREE, Match, ScanResult, scan, select_matches
from .series import as_values

__all__ = ["HyperParams", "ForecastResult", "project", "forecast", "forecast_from_scan", "clamp"]

AGGREGATORS = ("median", "mean")


@dataclass(frozen=True)
class HyperParams:
    """One point of the search space.

    ``min_separation=None`` means "same as the window length", i.e. selected
    matches never overlap.
    """

    w: int
    degree: int = 1
    m: int = 15
    min_separation: Optional[int] = None
    aggregator: str = "median"

    def __post_init__(self):
        if not 1 <= self.degree <= MAX_DEGREE:
            raise ValueError(f"degree must be in 1..{MAX_DEGREE}")
        if self.w < self.degree + 2:
            raise ValueError(f"window {self.w} too short for degree {self.degree}")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.min_separation is not None and self.min_separation < 0:
            raise ValueError("min_separation must be >= 0")
        if self.aggregator not in AGGREGATORS:
            raise ValueError(f"aggregator must be one of {AGGREGATORS}")

    @property
    def separation(self) -> int:
        return self.w if self.min_separation is None else self.min_separation

    def as_dict(self) -> dict:
        return {"w": self.w, "degree": self.degree, "m": self.m,
                "min_separation": self.separation, "aggregator": self.aggregator}


@dataclass(frozen=True, eq=False)
class ForecastResult:
    """Per-step forecasts for positions ``origin .. origin + h - 1``.

    ``projections`` has one row per match, in the order of ``matches``
    (descending R²).
    """

    point: np.ndarray
    q1: np.ndarray
    median: np.ndarray
    q3: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    projections: np.ndarray
    matches: tuple
    params: HyperParams
    origin: int

    @property
    def h(self) -> int:
        return self.point.size


def project(ts, match: Match, w: int, h: int) -> np.ndarray:
    """Map the ``h`` values after the matched window through its function."""
    vals = as_values(ts)
    if match.fn is None:
        raise ValueError("cannot project a degenerate match")
    begin = match.start + w
    if match.start < 0 or begin + h > vals.size:
        raise ValueError(f"follow-up of match at {match.start} runs past the series end")
    return match.fn(vals[begin:begin + h])


def _aggregate(projections: np.ndarray, params: HyperParams, origin: int, matches) -> ForecastResult:
    # sorting first keeps every statistic independent of the match order
    ordered = np.sort(projections, axis=0)
    q1, med, q3 = np.quantile(ordered, [0.25, 0.5, 0.75], axis=0, method="linear")
    point = med.copy() if params.aggregator == "median" else ordered.mean(axis=0)
    return ForecastResult(point=point, q1=q1, median=med, q3=q3, lo=ordered[0].copy(),
                          hi=ordered[-1].copy(), projections=projections,
                          matches=tuple(matches), params=params, origin=origin)


def forecast_from_scan(ts, scanned: ScanResult, params: HyperParams, h: int) -> ForecastResult:
    """Selection, projection and aggregation on top of an existing scan.

    Lets callers that try several match counts reuse one scan.
    """
    if scanned.w != params.w or scanned.degree != params.degree:
        raise ValueError("scan was computed for different window/degree")
    vals = as_values(ts)
    matches = select_matches(scanned, params.m, params.separation)
    projections = np.vstack([project(vals, mt, params.w, h) for mt in matches])
    return _aggregate(projections, params, vals.size, matches)


def forecast(ts, params: HyperParams, h: int, *, method: str = "fast",
             n_jobs: int = 1) -> ForecastResult:
    """Forecast the ``h`` values following the end of ``ts``."""
    scanned = scan(ts, params.w, h, params.degree, method=method, n_jobs=n_jobs)
    return forecast_from_scan(ts, scanned, params, h)


def clamp(result: ForecastResult, floor: float = float("-inf")) -> ForecastResult:
    """Floor every forecast and interval array, e.g. at 0 for wind speed.

    ``projections`` are left as they were.
    """
    if floor == float("-inf"):
        return result
    fields = {name: np.maximum(getattr(result, name), floor)
              for name in ("point", "q1", "median", "q3", "lo", "hi")}
    return replace(result, **fields)
