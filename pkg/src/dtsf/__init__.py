"""Dynamic time scan forecasting.

Find the historical windows of a long series that map best (by a fitted
polynomial, scored with R²) onto its latest ``w`` observations, and project
what followed them into a forecast.
"""

from .errors import (AllConfigsFailed, DegenerateTarget, DegenerateWindow, DTSFError,
                     EmptySeries, InsufficientData, IrregularSpacing, LengthMismatch,
                     MalformedRecord, TooFewMatches, ZeroDenominator)
from .forecast import ForecastResult, HyperParams, clamp, forecast, forecast_from_scan, project
from .metrics import ErrorReport, evaluate, mae, mf, naive_forecast, rmse, smape
from .scan import (Match, ScanResult, SimilarityFunction, fit_similarity, scan, select_matches,
                   target_window, valid_starts)
from .selection import ConfigScore, EvaluationReport, Grid, backtest, holdout_select
from .series import SeriesSummary, TimeSeries, aggregate, load_csv, summary_stats

__version__ = "0.1.0"

__all__ = [
    "TimeSeries", "SeriesSummary", "load_csv", "aggregate", "summary_stats",
    "SimilarityFunction", "Match", "ScanResult", "target_window", "valid_starts",
    "fit_similarity", "scan", "select_matches",
    "HyperParams", "ForecastResult", "project", "forecast", "forecast_from_scan", "clamp",
    "Grid", "ConfigScore", "EvaluationReport", "holdout_select", "backtest",
    "ErrorReport", "mae", "rmse", "smape", "mf", "evaluate", "naive_forecast",
    "DTSFError", "MalformedRecord", "IrregularSpacing", "EmptySeries", "InsufficientData",
    "DegenerateWindow", "DegenerateTarget", "TooFewMatches", "AllConfigsFailed",
    "LengthMismatch", "ZeroDenominator",
]
