"""Window scanning: fit a polynomial similarity function from every
historical window onto the most recent window and score it by R².

Two solvers produce the same numbers:

``"naive"``
    One Householder QR per window (``numpy.linalg.qr``). Slow, simple, and
    the reference the fast path is checked against.
``"fast"``
    Windows are processed in fixed-size blocks; each block runs a modified
    Gram-Schmidt on all its design matrices at once, with the target vector
    orthogonalised alongside as an extra column (the backward-stable least
    squares variant). Fixed block boundaries make the output bit-identical
    whatever ``n_jobs`` is.

In both paths the window values are centred and scaled to unit variance
before the powers are formed, and the coefficients are mapped back to raw
powers of ``x`` afterwards.
"""

from __future__ import annotations

from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import comb
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from numpy.polynomial import Polynomial
from numpy.polynomial import polynomial as P
from scipy.linalg import solve_triangular

from .errors import (DegenerateTarget, DegenerateWindow, InsufficientData,
                     TooFewMatches)
from .series import as_values

__all__ = [
    "SimilarityFunction",
    "Match",
    "ScanResult",
    "target_window",
    "valid_starts",
    "fit_similarity",
    "scan",
    "select_matches",
    "RANK_TOL",
    "MAX_DEGREE",
]

#: a design matrix is rank deficient when sigma_min < RANK_TOL * sigma_max
RANK_TOL = 1e-10
MAX_DEGREE = 4
DEFAULT_CHUNK = 512


@dataclass(frozen=True)
class SimilarityFunction:
    """Polynomial ``f(x) = sum_d coefficients[d] * x**d`` (ascending powers)."""

    degree: int
    coefficients: tuple

    def __post_init__(self):
        coefs = tuple(float(c) for c in self.coefficients)
        if not 1 <= self.degree <= MAX_DEGREE:
            raise ValueError(f"degree must be in 1..{MAX_DEGREE}, got {self.degree}")
        if len(coefs) != self.degree + 1:
            raise ValueError("need exactly degree + 1 coefficients")
        if not all(np.isfinite(coefs)):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "coefficients", coefs)

    def __call__(self, x):
        return P.polyval(np.asarray(x, dtype=np.float64), self.coefficients)


@dataclass(frozen=True)
class Match:
    """A scored candidate window.

    ``r2`` is ``-inf`` and ``fn`` is ``None`` for degenerate windows.
    """

    start: int
    r2: float
    fn: Optional[SimilarityFunction]


@dataclass(frozen=True, eq=False)
class ScanResult(Sequence):
    """Scores and coefficients for every valid start, in start order.

    Behaves as a read-only sequence of :class:`Match`; position ``i`` is the
    window starting at index ``i``. The arrays are what the hot paths use.
    """

    w: int
    h: int
    degree: int
    series_length: int
    r2: np.ndarray
    coefficients: np.ndarray

    @property
    def starts(self) -> np.ndarray:
        return np.arange(self.r2.size)

    def __len__(self):
        return self.r2.size

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        i = range(len(self))[i]
        r2 = float(self.r2[i])
        if not np.isfinite(r2):
            return Match(i, float("-inf"), None)
        return Match(i, r2, SimilarityFunction(self.degree, tuple(self.coefficients[i])))


def _check_degree(degree: int) -> None:
    if not 1 <= degree <= MAX_DEGREE:
        raise ValueError(f"degree must be in 1..{MAX_DEGREE}, got {degree}")


def target_window(ts, w: int) -> np.ndarray:
    """The last ``w`` observations, oldest first."""
    vals = as_values(ts)
    if w < 1:
        raise ValueError("window length must be positive")
    if vals.size < w:
        raise InsufficientData(f"series of length {vals.size} is shorter than window {w}")
    return vals[vals.size - w:]


def valid_starts(n: int, w: int, h: int) -> range:
    """Start indices of candidate windows.

    A start ``s`` is valid when the window ``[s, s+w-1]`` ends before the
    target window begins and its ``h`` follow-up values lie inside the series.
    """
    if n < 1 or w < 1 or h < 1:
        raise ValueError("n, w and h must be positive")
    if h > w:
        raise ValueError(f"horizon {h} exceeds window {w}")
    last = min(n - 2 * w, n - w - h)
    if last < 0:
        raise InsufficientData(f"need at least {2 * w} observations for window {w}, have {n}")
    return range(0, last + 1)


def _raw_coefficients(scaled: np.ndarray, center: float, scale: float) -> np.ndarray:
    """Rewrite a polynomial in ``(x - center) / scale`` as one in ``x``."""
    composed = Polynomial(scaled)(Polynomial([-center / scale, 1.0 / scale]))
    out = np.zeros(scaled.size)
    out[: composed.coef.size] = composed.coef[: scaled.size]
    return out


def _raw_coefficients_batch(scaled, center, scale):
    # beta_j = sum_{k>=j} c_k * C(k, j) * (-center)**(k-j) / scale**k
    deg = scaled.shape[1] - 1
    out = np.zeros_like(scaled)
    inv = 1.0 / scale
    for k in range(deg + 1):
        ck = scaled[:, k] * inv ** k
        for j in range(k + 1):
            out[:, j] += ck * comb(k, j) * (-center) ** (k - j)
    return out


def fit_similarity(x, y, degree: int):
    """Least-squares polynomial map from candidate ``x`` onto target ``y``.

    Returns ``(SimilarityFunction, r2)`` where
    ``r2 = 1 - SS_res / SS_tot`` with ``SS_tot`` taken about the mean of
    ``y``. ``r2`` can be negative only in pathological cases and never
    exceeds one.

    Raises
    ------
    DegenerateTarget
        ``y`` is constant.
    DegenerateWindow
        The (scaled) design matrix is numerically rank deficient.
    """
    _check_degree(degree)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D and of equal length")
    if x.size < degree + 2:
        raise InsufficientData(f"window of {x.size} too short for degree {degree}")
    if np.ptp(y) == 0:
        raise DegenerateTarget("target window is constant")
    if np.ptp(x) == 0:
        raise DegenerateWindow("candidate window is constant")

    center = x.mean()
    xc = x - center
    scale = np.sqrt(xc @ xc / x.size)
    design = (xc / scale)[:, None] ** np.arange(degree + 1)
    q, r = np.linalg.qr(design)
    sv = np.linalg.svd(r, compute_uv=False)
    if not sv[-1] >= RANK_TOL * sv[0]:
        raise DegenerateWindow("design matrix is rank deficient")
    scaled = solve_triangular(r, q.T @ y)
    resid = y - design @ scaled
    yc = y - y.mean()
    r2 = 1.0 - (resid @ resid) / (yc @ yc)
    fn = SimilarityFunction(degree, tuple(_raw_coefficients(scaled, center, scale)))
    return fn, float(r2)


def _fit_block(windows: np.ndarray, y: np.ndarray, degree: int, ss_tot: float):
    """Vectorised fit of every row of ``windows`` against ``y``."""
    b, w = windows.shape
    k = degree + 1
    center = windows.mean(axis=1)
    xc = windows - center[:, None]
    scale = np.sqrt(np.einsum("ij,ij->i", xc, xc) / w)
    flat = windows.max(axis=1) == windows.min(axis=1)
    z = xc / np.where(flat, 1.0, scale)[:, None]

    R = np.zeros((b, k, k))
    qty = np.zeros((b, k))
    resid = np.repeat(y[None, :], b, axis=0)
    basis = []
    power = np.ones((b, w))
    with np.errstate(divide="ignore", invalid="ignore"):
        for a in range(k):
            v = power.copy()
            for j, qj in enumerate(basis):
                rja = np.einsum("ij,ij->i", qj, v)
                R[:, j, a] = rja
                v -= rja[:, None] * qj
            norm = np.sqrt(np.einsum("ij,ij->i", v, v))
            R[:, a, a] = norm
            qa = v / norm[:, None]
            basis.append(qa)
            t = np.einsum("ij,ij->i", qa, resid)
            qty[:, a] = t
            resid -= t[:, None] * qa
            if a < degree:
                power = power * z

        finite = np.all(np.isfinite(R.reshape(b, -1)), axis=1) & np.all(np.isfinite(qty), axis=1)
        sv = np.linalg.svd(np.where(finite[:, None, None], R, 0.0), compute_uv=False)
        ok = finite & ~flat & (sv[:, -1] >= RANK_TOL * sv[:, 0])

        scaled = np.zeros((b, k))
        for a in range(k - 1, -1, -1):
            acc = qty[:, a] - np.einsum("ij,ij->i", R[:, a, a + 1:], scaled[:, a + 1:])
            scaled[:, a] = acc / R[:, a, a]
        ss_res = np.einsum("ij,ij->i", resid, resid)
        r2 = np.where(ok, 1.0 - ss_res / ss_tot, -np.inf)
        coefs = _raw_coefficients_batch(scaled, center, np.where(flat, 1.0, scale))
    coefs[~ok] = np.nan
    return r2, coefs


def _naive_block(windows: np.ndarray, y: np.ndarray, degree: int):
    r2 = np.full(windows.shape[0], -np.inf)
    coefs = np.full((windows.shape[0], degree + 1), np.nan)
    for i, x in enumerate(windows):
        try:
            fn, r2[i] = fit_similarity(x, y, degree)
        except DegenerateWindow:
            continue
        coefs[i] = fn.coefficients
    return r2, coefs


def scan(ts, w: int, h: int, degree: int, *, method: str = "fast",
         n_jobs: int = 1, chunk_size: int = DEFAULT_CHUNK) -> ScanResult:
    """Score every valid candidate window against the target window.

    Parameters
    ----------
    ts : TimeSeries or array-like
    w, h : int
        Window length and forecast horizon (``1 <= h <= w``).
    degree : int
        Polynomial degree of the similarity function, 1 to 4.
    method : {"fast", "naive"}
    n_jobs : int
        Worker threads. Output does not depend on this value.
    chunk_size : int
        Windows per block. Part of the numerical recipe: keep it fixed when
        comparing outputs bit for bit.
    """
    _check_degree(degree)
    if w < degree + 2:
        raise ValueError(f"window {w} too short for degree {degree}")
    if method not in ("fast", "naive"):
        raise ValueError(f"unknown scan method {method!r}")
    vals = as_values(ts)
    starts = valid_starts(vals.size, w, h)
    y = target_window(vals, w)
    if np.ptp(y) == 0:
        raise DegenerateTarget("target window is constant")
    yc = y - y.mean()
    ss_tot = float(yc @ yc)

    windows = sliding_window_view(vals, w)[: len(starts)]
    bounds = [(s, min(s + chunk_size, len(starts))) for s in range(0, len(starts), chunk_size)]
    if method == "fast":
        def work(bound):
            return _fit_block(windows[bound[0]:bound[1]], y, degree, ss_tot)
    else:
        def work(bound):
            return _naive_block(windows[bound[0]:bound[1]], y, degree)

    if n_jobs > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            parts = list(pool.map(work, bounds))
    else:
        parts = [work(b) for b in bounds]
    r2 = np.concatenate([p[0] for p in parts])
    coefs = np.concatenate([p[1] for p in parts])
    r2.setflags(write=False)
    coefs.setflags(write=False)
    return ScanResult(w=w, h=h, degree=degree, series_length=vals.size, r2=r2,
                      coefficients=coefs)


def select_matches(matches, m: int, min_separation: Optional[int] = None) -> list:
    """Greedy best-first selection with non-maximum suppression.

    Candidates are visited by descending R² (ties go to the later start). A
    candidate is skipped when it starts fewer than ``min_separation`` steps
    from an already chosen match. Degenerate windows are never chosen.
    ``min_separation`` defaults to the window length for a
    :class:`ScanResult`, otherwise to 0.

    Raises
    ------
    TooFewMatches
        Fewer than ``m`` candidates survive.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if isinstance(matches, ScanResult):
        r2 = matches.r2
        starts = matches.starts
        if min_separation is None:
            min_separation = matches.w
    else:
        matches = list(matches)
        r2 = np.array([mt.r2 for mt in matches], dtype=np.float64)
        starts = np.array([mt.start for mt in matches], dtype=np.int64)
        if min_separation is None:
            min_separation = 0
    if min_separation < 0:
        raise ValueError("min_separation must be >= 0")

    idx = np.flatnonzero(np.isfinite(r2))
    order = idx[np.lexsort((-starts[idx], -r2[idx]))]
    chosen: list[int] = []
    taken: list[int] = []
    for i in order:
        s = int(starts[i])
        if all(abs(s - t) >= min_separation for t in taken):
            chosen.append(int(i))
            taken.append(s)
            if len(chosen) == m:
                break
    if len(chosen) < m:
        raise TooFewMatches(len(chosen), m)
    return [matches[i] for i in chosen]
