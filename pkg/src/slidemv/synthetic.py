"""Seeded synthetic price histories.

Log returns are i.i.d. multivariate normal.  Normals come from the
Marsaglia polar method fed by raw PCG64 bits, and the correlation is applied
with an in-tree Cholesky factor.  A given seed therefore reproduces the same
bits regardless of numpy's distribution code or the BLAS in use.
"""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .market_data import PriceTable

INDEX_RULES = ("equal_weight_of_assets", "explicit_column")
START_DATE = dt.date(2001, 1, 2)


class CovarianceError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SynthSpec:
    """``days`` is the number of price rows; ``days - 1`` return rows are drawn."""

    mean: np.ndarray
    cov: np.ndarray
    days: int
    seed: int
    initial_prices: Optional[np.ndarray] = None
    index_rule: str = "equal_weight_of_assets"
    index_name: str = "INDEX"
    asset_names: Optional[tuple] = None

    def __post_init__(self):
        mean = np.ascontiguousarray(self.mean, dtype=float).reshape(-1)
        cov = np.ascontiguousarray(self.cov, dtype=float)
        d = mean.size
        if d < 1:
            raise ValueError("need at least one asset")
        if cov.shape != (d, d):
            raise ValueError(f"cov shape {cov.shape} does not match {d} assets")
        if not np.array_equal(cov, cov.T):
            raise CovarianceError("covariance is not symmetric")
        if self.days < 2:
            raise ValueError("need at least 2 days")
        init = np.full(d, 100.0) if self.initial_prices is None else np.asarray(self.initial_prices, dtype=float)
        if init.shape != (d,) or not np.all(init > 0):
            raise ValueError("initial prices must be d positive numbers")
        if self.index_rule not in INDEX_RULES:
            raise ValueError(f"unknown index rule {self.index_rule!r}")
        names = self.asset_names or tuple(f"A{j + 1:02d}" for j in range(d))
        if len(names) != d:
            raise ValueError("asset_names length mismatch")
        if self.index_rule == "explicit_column" and self.index_name not in names:
            raise ValueError(f"explicit index column {self.index_name!r} not among asset names")
        if self.index_rule == "equal_weight_of_assets" and self.index_name in names:
            raise ValueError(f"index name {self.index_name!r} collides with an asset name")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "initial_prices", init)
        object.__setattr__(self, "asset_names", tuple(names))
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def assets(self) -> int:
        return self.mean.size


def uniforms(seed: int, count: int, stream=None):
    """``count`` doubles in [0, 1) from the top 53 bits of raw PCG64 output."""
    bg = stream if stream is not None else np.random.PCG64(seed)
    raw = bg.random_raw(count)
    return (raw >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def standard_normals(seed: int, count: int) -> np.ndarray:
    """Polar-method standard normals; pairs are emitted in acceptance order."""
    bg = np.random.PCG64(seed)
    out = np.empty(count)
    filled = 0
    while filled < count:
        need = count - filled
        pairs = need // 2 + 1
        batch = int(pairs * 1.3) + 8  # acceptance rate is pi/4
        u = uniforms(seed, 2 * batch, stream=bg).reshape(batch, 2) * 2.0 - 1.0
        s = u[:, 0] ** 2 + u[:, 1] ** 2
        ok = (s > 0.0) & (s < 1.0)
        u, s = u[ok], s[ok]
        f = np.sqrt(-2.0 * np.log(s) / s)
        z = (u * f[:, None]).reshape(-1)
        take = min(z.size, need)
        out[filled:filled + take] = z[:take]
        filled += take
    return out


def cholesky_factor(cov) -> np.ndarray:
    L, ok = kernels.cholesky_psd(np.ascontiguousarray(cov, dtype=float), 1e-12)
    if not ok:
        raise CovarianceError("covariance is not positive semidefinite")
    return L


def generate_log_returns(spec: SynthSpec) -> np.ndarray:
    """(days - 1, d) matrix of log returns for ``spec``."""
    L = cholesky_factor(spec.cov)
    T1, d = spec.days - 1, spec.assets
    z = standard_normals(spec.seed, T1 * d).reshape(T1, d)
    return kernels.correlate_rows(z, L, spec.mean)


def trading_dates(n: int, start: dt.date = START_DATE) -> tuple:
    days = np.busday_offset(np.datetime64(start, "D"), np.arange(n), roll="forward")
    return tuple(d.astype(dt.date) for d in days)


def generate(spec: SynthSpec) -> PriceTable:
    P = kernels.accumulate_prices(spec.initial_prices, generate_log_returns(spec))
    names = spec.asset_names
    if spec.index_rule == "equal_weight_of_assets":
        P = np.column_stack([P, P.mean(axis=1)])
        names = names + (spec.index_name,)
    return PriceTable(dates=trading_dates(spec.days), assets=names, prices=P, index_column=spec.index_name)


def market_spec(assets: int = 16, days: int = 2000, seed: int = 42,
                drift: float = 4e-4, vol_range: Sequence[float] = (0.008, 0.025),
                market_share: float = 0.5) -> SynthSpec:
    """One-factor market: each asset loads on a common factor plus noise.

    Drifts and volatilities are spread deterministically from ``seed`` so the
    universe has a visible risk/return spread.
    """
    u = uniforms(seed ^ 0x5EED, 3 * assets).reshape(3, assets)
    vol = vol_range[0] + (vol_range[1] - vol_range[0]) * u[0]
    beta = 0.5 + u[1]
    mu = drift * (0.25 + 1.5 * u[2]) * vol / vol.mean()
    factor = np.sqrt(market_share) * vol * beta / beta.max()
    cov = np.outer(factor, factor)
    idio = vol ** 2 - np.diag(cov)
    cov[np.diag_indices(assets)] += idio
    cov = 0.5 * (cov + cov.T)
    return SynthSpec(mean=mu, cov=cov, days=days, seed=seed)
