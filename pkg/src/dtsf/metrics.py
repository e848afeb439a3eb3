"""Forecast error statistics and the previous-period baseline."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import InsufficientData, LengthMismatch, ZeroDenominator
from .series import as_values

__all__ = ["ErrorReport", "mae", "rmse", "smape", "mf", "evaluate", "naive_forecast"]


def _pair(y, yhat):
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    yhat = np.asarray(yhat, dtype=np.float64).reshape(-1)
    if y.size != yhat.size:
        raise LengthMismatch(f"lengths differ: {y.size} vs {yhat.size}")
    if y.size == 0:
        raise LengthMismatch("empty input")
    return y, yhat


def mae(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    return float(np.mean(np.abs(y - yhat)))


def rmse(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    dev = np.abs(y - yhat)
    top = dev.max()
    if top == 0:
        return 0.0
    # scale before squaring so tiny or huge deviations neither underflow nor overflow
    return float(top * np.sqrt(np.mean((dev / top) ** 2)))


def smape(y, yhat) -> float:
    """Symmetric MAPE, ``2/k * sum |y - yhat| / (|y| + |yhat|)``; lies in [0, 2]."""
    y, yhat = _pair(y, yhat)
    denom = np.abs(y) + np.abs(yhat)
    zero = np.flatnonzero(denom == 0)
    if zero.size:
        raise ZeroDenominator(int(zero[0]), "|y| + |yhat|")
    return float(2.0 * np.mean(np.abs(y - yhat) / denom))


def mf(y, yhat) -> float:
    """``k * sum (y - yhat)**2 / (sum y)**2``."""
    y, yhat = _pair(y, yhat)
    total = y.sum()
    if total == 0:
        raise ZeroDenominator(None, "sum of observations")
    return float(y.size * np.sum(((y - yhat) / total) ** 2))


@dataclass(frozen=True)
class ErrorReport:
    mae: float
    rmse: float
    smape: float
    mf: float
    k: int

    def as_dict(self) -> dict:
        return asdict(self)


def evaluate(y, yhat) -> ErrorReport:
    y, yhat = _pair(y, yhat)
    return ErrorReport(mae=mae(y, yhat), rmse=rmse(y, yhat), smape=smape(y, yhat),
                       mf=mf(y, yhat), k=int(y.size))


def naive_forecast(ts, h: int) -> np.ndarray:
    """Repeat the last ``h`` observations (for 30-minute data, h=48 is one day)."""
    vals = as_values(ts)
    if h < 1:
        raise ValueError("h must be positive")
    if vals.size < h:
        raise InsufficientData(f"series of length {vals.size} shorter than horizon {h}")
    return vals[vals.size - h:].copy()
