"""Grid sweep of the strategy over (k, observation length, holding length)."""
from __future__ import annotations

import hashlib
import logging
import multiprocessing as mp
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from . import __version__
from .estimator import WindowSpec
from .market_data import PriceTable, ReturnTable
from .strategy import SimulationResult, StrategyParams, evaluable_range, run_simulation

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SweepGrid:
    k_values: tuple
    observation_lengths: tuple
    holding_lengths: tuple
    window_shape: str = "rectangular"
    sigma: Optional[float] = None
    convention: str = "paper"
    investable: Optional[tuple] = None
    ridge: Optional[float] = None
    max_span_fraction: Optional[float] = None  # blank cells with p + q > fraction * history

    def __post_init__(self):
        for name in ("k_values", "observation_lengths", "holding_lengths"):
            vals = tuple(getattr(self, name))
            if not vals:
                raise ValueError(f"{name} is empty")
            if any(not v > 0 for v in vals):
                raise ValueError(f"{name} has non-positive entries")
            if len(set(vals)) != len(vals):
                raise ValueError(f"{name} has duplicates")
            object.__setattr__(self, name, vals)
        if self.investable is not None:
            object.__setattr__(self, "investable", tuple(self.investable))

    def points(self):
        for k in self.k_values:
            for p in self.observation_lengths:
                for q in self.holding_lengths:
                    yield (k, p, q)

    def params(self, k, p, q) -> StrategyParams:
        return StrategyParams(
            observation_p=p, holding_q=q, multiple_k=k,
            window=WindowSpec(p, self.window_shape, self.sigma),
            investable=self.investable, convention=self.convention, ridge=self.ridge,
        )


@dataclass(frozen=True)
class SweepCell:
    k: float
    p: int
    q: int
    evaluable: bool
    reference_avg: Optional[float] = None
    real_avg: Optional[float] = None
    trade_count: int = 0
    skipped_index_down: int = 0
    skipped_infeasible: int = 0
    reason: str = ""

    @property
    def empty(self) -> bool:
        """True when nothing was traded (printed blank, like a missing table entry)."""
        return not self.evaluable or self.trade_count == 0

    @classmethod
    def from_result(cls, k, p, q, result: SimulationResult) -> "SweepCell":
        skips = result.skip_counts
        return cls(
            k=k, p=p, q=q, evaluable=True,
            reference_avg=result.reference_avg,
            real_avg=result.real_avg,
            trade_count=result.trade_count,
            skipped_index_down=skips["skipped_index_down"],
            skipped_infeasible=skips["skipped_infeasible"],
        )


@dataclass
class SweepTable:
    grid: SweepGrid
    cells: dict  # (k, p, q) -> SweepCell
    fingerprint: str = ""
    version: str = __version__
    results: dict = field(default_factory=dict, repr=False)

    def cell(self, k, p, q) -> SweepCell:
        return self.cells[(k, p, q)]


def fingerprint(prices: PriceTable) -> str:
    h = hashlib.sha256()
    h.update(",".join(prices.assets).encode())
    h.update(prices.index_column.encode())
    h.update(",".join(d.isoformat() for d in prices.dates).encode())
    h.update(prices.prices.tobytes())
    return h.hexdigest()[:16]


def _not_evaluable(grid: SweepGrid, n_prices: int, p: int, q: int) -> Optional[str]:
    if not evaluable_range(n_prices, grid.params(1.0, p, q)):
        return f"p + q = {p + q} leaves no entry day in {n_prices} price rows"
    if grid.max_span_fraction is not None and p + q > grid.max_span_fraction * n_prices:
        return f"p + q = {p + q} exceeds {grid.max_span_fraction:g} of history"
    return None


def _run_point(prices, returns, grid, key, keep):
    k, p, q = key
    reason = _not_evaluable(grid, len(prices), p, q)
    if reason:
        return key, SweepCell(k=k, p=p, q=q, evaluable=False, reason=reason), None
    result = run_simulation(prices, returns, grid.params(k, p, q))
    return key, SweepCell.from_result(k, p, q, result), (result if keep else None)


_WORKER = {}


def _init_worker(prices, returns, grid, keep):
    _WORKER.update(prices=prices, returns=returns, grid=grid, keep=keep)


def _worker_point(key):
    w = _WORKER
    return _run_point(w["prices"], w["returns"], w["grid"], key, w["keep"])


def run_sweep(prices: PriceTable, returns: ReturnTable, grid: SweepGrid, jobs: int = 1,
              keep_results: bool = False) -> SweepTable:
    """One simulation per grid point; the merge is by key so ``jobs`` never changes the output."""
    if returns.convention != grid.convention:
        raise ValueError(f"return convention mismatch: returns use {returns.convention!r}, grid asks for {grid.convention!r}")
    keys = list(grid.points())
    if jobs <= 1 or len(keys) == 1:
        outputs = [_run_point(prices, returns, grid, key, keep_results) for key in keys]
    else:
        ctx = mp.get_context("fork")
        with ProcessPoolExecutor(max_workers=jobs, mp_context=ctx, initializer=_init_worker,
                                 initargs=(prices, returns, grid, keep_results)) as pool:
            outputs = list(pool.map(_worker_point, keys))
    cells, results = {}, {}
    for key, cell, result in outputs:
        cells[key] = cell
        if result is not None:
            results[key] = result
        log.debug("cell %s: %s", key, cell)
    return SweepTable(grid=grid, cells={k: cells[k] for k in keys}, fingerprint=fingerprint(prices),
                      results=results)


def best_cell(table: SweepTable, k) -> tuple:
    """(p, q) with the highest real average return for multiple ``k``.

    Ties go to the smaller p, then the smaller q.
    """
    candidates = [c for (kk, _, _), c in table.cells.items() if kk == k and not c.empty]
    if not candidates:
        raise ValueError(f"no evaluable cells for k={k}")
    best = min(candidates, key=lambda c: (-c.real_avg, c.p, c.q))
    return best.p, best.q
