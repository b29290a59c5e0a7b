"""Sliding-window estimates of expected returns and covariances."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .market_data import ReturnTable

SHAPES = ("rectangular", "half_gaussian")


class InsufficientHistory(ValueError):
    pass


@dataclass(frozen=True)
class WindowSpec:
    length_n: int
    shape: str = "rectangular"
    sigma: Optional[float] = None  # days; half_gaussian only, default n/2

    def __post_init__(self):
        if int(self.length_n) != self.length_n or self.length_n < 2:
            raise ValueError(f"window length must be an integer >= 2, got {self.length_n}")
        if self.shape not in SHAPES:
            raise ValueError(f"unknown window shape {self.shape!r}")
        if self.shape == "half_gaussian" and self.sigma is not None and not self.sigma > 0:
            raise ValueError("half_gaussian sigma must be positive")
        object.__setattr__(self, "length_n", int(self.length_n))

    @property
    def effective_sigma(self) -> float:
        return float(self.sigma) if self.sigma is not None else self.length_n / 2.0

    def with_length(self, n: int) -> "WindowSpec":
        return WindowSpec(n, self.shape, self.sigma)


@dataclass(frozen=True, eq=False)
class EstimateSet:
    as_of_day: int
    assets: tuple
    mean: np.ndarray
    cov: np.ndarray
    window: WindowSpec


def window_weights(spec: WindowSpec) -> np.ndarray:
    """Observation weights for one window, oldest first, summing to 1.

    The half-Gaussian peaks on the most recent day and decays into the past
    as exp(-d^2 / (2 sigma^2)) with d the age in days.
    """
    n = spec.length_n
    if spec.shape == "rectangular":
        return np.full(n, 1.0 / n)
    age = np.arange(n - 1, -1, -1, dtype=float)
    raw = np.exp(-(age ** 2) / (2.0 * spec.effective_sigma ** 2))
    return raw / raw.sum()


def _window(returns: ReturnTable, as_of_day: int, n: int, columns) -> np.ndarray:
    if as_of_day < n:
        raise InsufficientHistory(f"day {as_of_day}: a {n}-day window needs day >= {n}")
    if as_of_day > len(returns):
        raise InsufficientHistory(f"day {as_of_day} beyond the last return day {len(returns)}")
    # price day i <-> return row i - 1; window covers days as_of_day-n+1 .. as_of_day
    x = np.ascontiguousarray(returns.log[as_of_day - n:as_of_day][:, columns])
    if not np.all(np.isfinite(x)):
        raise ValueError(f"day {as_of_day}: window contains non-finite returns")
    return x


def estimate(returns: ReturnTable, as_of_day: int, spec: WindowSpec,
             asset_subset: Optional[Sequence[str]] = None) -> EstimateSet:
    assets = tuple(asset_subset) if asset_subset is not None else returns.assets
    cols = [returns.assets.index(a) for a in assets]
    x = _window(returns, as_of_day, spec.length_n, cols)
    mean, cov = kernels.window_moments(x, window_weights(spec))
    return EstimateSet(as_of_day=as_of_day, assets=assets, mean=mean, cov=cov, window=spec)


@dataclass(frozen=True, eq=False)
class RollingStats:
    days: np.ndarray
    dates: tuple
    mean: np.ndarray
    std: np.ndarray


def rolling_stats(returns: ReturnTable, asset: str, spec: WindowSpec) -> RollingStats:
    """Windowed mean and population std of one asset for every day from n on."""
    n = spec.length_n
    T = len(returns)
    if T <= n:
        raise InsufficientHistory(f"{T} returns is not more than the window length {n}")
    col = returns.log_column(asset)
    if not np.all(np.isfinite(col)):
        raise ValueError(f"{asset}: non-finite returns")
    w = window_weights(spec)
    days = np.arange(n, T + 1)
    means = np.empty(days.size)
    var = np.empty(days.size)
    for c, day in enumerate(days):
        m, v = kernels.window_moments(np.ascontiguousarray(col[day - n:day, None]), w)
        means[c] = m[0]
        var[c] = v[0, 0]
    dates = tuple(returns.dates[d - 1] for d in days)
    return RollingStats(days=days, dates=dates, mean=means, std=np.sqrt(np.maximum(var, 0.0)))


def write_rolling_csv(stats: RollingStats, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("day", "date", "mean", "std"))
        for day, date, m, s in zip(stats.days, stats.dates, stats.mean, stats.std):
            w.writerow((int(day), date.isoformat(), f"{m:.6g}", f"{s:.6g}"))
