"""Small statistical helpers shared by the Monte Carlo modules."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class PowerFit:
    slope: float
    intercept: float
    stderr: float
    n_points: int


def fit_loglog(x, y, min_points: int = 5) -> PowerFit:
    """OLS fit of log y against log x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = (x > 0) & (y > 0) & np.isfinite(x) & np.isfinite(y)
    if ok.sum() < min_points:
        raise ValueError(f"need at least {min_points} positive points for a log-log fit, got {ok.sum()}")
    res = stats.linregress(np.log(x[ok]), np.log(y[ok]))
    return PowerFit(float(res.slope), float(res.intercept), float(res.stderr), int(ok.sum()))


def clopper_pearson(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    a = 1.0 - level
    lo = 0.0 if k == 0 else stats.beta.ppf(a / 2, k, n - k + 1)
    hi = 1.0 if k == n else stats.beta.ppf(1 - a / 2, k + 1, n - k)
    return float(lo), float(hi)


def ks_distance(sample, cdf) -> float:
    """One-sample Kolmogorov-Smirnov distance to a callable CDF."""
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    if n == 0:
        raise ValueError("empty sample")
    F = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def ks_two_sample(a, b) -> float:
    return float(stats.ks_2samp(np.asarray(a), np.asarray(b)).statistic)


def ecdf(sample, grid) -> np.ndarray:
    x = np.sort(np.asarray(sample, dtype=float))
    return np.searchsorted(x, grid, side="right") / x.size


def fsum_mean(values) -> float:
    """Order-insensitive mean (exactly rounded sum)."""
    v = list(np.asarray(values, dtype=float).ravel())
    return math.fsum(v) / len(v)


def mean_stderr(values, axis=0):
    v = np.asarray(values, dtype=float)
    n = v.shape[axis]
    return v.mean(axis=axis), v.std(axis=axis, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(v.mean(axis=axis))
