from datetime import datetime, timedelta

import numpy as np
import pytest

from dtsf import TimeSeries


def sinusoid(n, period=24, amplitude=1.0, offset=0.0, phase=0.0):
    t = np.arange(n)
    return offset + amplitude * np.sin(2 * np.pi * t / period + phase)


def wind_like(n, seed=0, period=48, noise=0.9, phi=0.8):
    """Daily cycle + slow seasonal modulation + AR(1) noise, floored at 0.25."""
    rng = np.random.default_rng(seed)
    t = np.arange(n)
    season = 1.0 + 0.35 * np.sin(2 * np.pi * t / (period * 365.25))
    daily = 2.5 * season * np.sin(2 * np.pi * t / period - 1.0)
    eps = rng.normal(0.0, noise, n)
    ar = np.empty(n)
    ar[0] = eps[0]
    for i in range(1, n):
        ar[i] = phi * ar[i - 1] + eps[i]
    return np.maximum(8.65 + daily + 1.2 * np.sin(2 * np.pi * t / (period * 365.25)) + ar, 0.25)


def write_csv(path, values, start=datetime(2015, 1, 1), step=timedelta(minutes=30),
              header="time,speed"):
    with open(path, "w") as fh:
        if header:
            fh.write(header + "\n")
        for i, v in enumerate(values):
            fh.write(f"{(start + i * step).isoformat()},{float(v)!r}\n")
    return path


@pytest.fixture
def wind_csv(tmp_path):
    return write_csv(tmp_path / "wind.csv", np.round(wind_like(48 * 60, seed=3), 3))


@pytest.fixture
def half_hourly():
    def make(values, start=datetime(2015, 1, 1)):
        return TimeSeries(np.asarray(values, dtype=float), start, timedelta(minutes=30))
    return make
