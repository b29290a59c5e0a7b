"""Fixed-holding-period trading simulation.

Each day ``i``: skip if the index fell (log return <= 0); otherwise estimate
mean/covariance over the past ``p`` days, ask the QP for the minimum-variance
long-only portfolio whose expected return is at least ``k`` times the
index's return that day, buy at day ``i``'s close and sell at day ``i+q``'s
close.  Trades overlap freely; each one is a unit-capital round trip.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import kernels, qp
from .estimator import WindowSpec, estimate, window_weights
from .market_data import PriceTable, ReturnTable

DECISIONS = {
    kernels.TRADED: "traded",
    kernels.SKIPPED_INDEX_DOWN: "skipped_index_down",
    kernels.SKIPPED_INFEASIBLE: "skipped_infeasible",
}


class SimulationError(RuntimeError):
    def __init__(self, day: int, message: str):
        super().__init__(f"day {day}: {message}")
        self.day = day


@dataclass(frozen=True)
class StrategyParams:
    observation_p: int
    holding_q: int
    multiple_k: float
    window: Optional[WindowSpec] = None  # defaults to a rectangular window of length p
    investable: Optional[tuple] = None  # None -> every non-index asset
    convention: str = "paper"
    ridge: Optional[float] = None  # None -> relative ridge per day

    def __post_init__(self):
        if int(self.observation_p) != self.observation_p or self.observation_p < 2:
            raise ValueError("observation_p must be an integer >= 2")
        if int(self.holding_q) != self.holding_q or self.holding_q < 1:
            raise ValueError("holding_q must be an integer >= 1")
        if not self.multiple_k > 0:
            raise ValueError("multiple_k must be positive")
        window = self.window or WindowSpec(self.observation_p)
        if window.length_n != self.observation_p:
            raise ValueError(f"window length {window.length_n} != observation_p {self.observation_p}")
        object.__setattr__(self, "window", window)
        if self.investable is not None:
            object.__setattr__(self, "investable", tuple(self.investable))

    def assets(self, prices: PriceTable) -> tuple:
        if self.investable is None:
            return prices.non_index_assets
        missing = [a for a in self.investable if a not in prices.assets]
        if missing:
            raise ValueError(f"unknown investable assets: {missing}")
        return self.investable


@dataclass(frozen=True, eq=False)
class TradeRecord:
    entry_day: int
    exit_day: int
    decision: str
    weights: Optional[np.ndarray] = None
    entry_prices: Optional[np.ndarray] = None
    exit_prices: Optional[np.ndarray] = None
    round_trip_return: Optional[float] = None
    daily_avg_return: Optional[float] = None
    reference_daily_avg: float = 0.0
    target: Optional[float] = None
    solution: Optional[qp.PortfolioSolution] = None

    @property
    def traded(self) -> bool:
        return self.decision == "traded"


@dataclass(frozen=True, eq=False)
class SimulationResult:
    params: StrategyParams
    assets: tuple
    trades: tuple
    dates: tuple = field(repr=False, default=())

    @property
    def traded(self) -> list:
        return [t for t in self.trades if t.traded]

    @property
    def trade_count(self) -> int:
        return sum(1 for t in self.trades if t.traded)

    @property
    def skip_counts(self) -> dict:
        out = {"skipped_index_down": 0, "skipped_infeasible": 0}
        for t in self.trades:
            if not t.traded:
                out[t.decision] += 1
        return out

    @property
    def real_avg(self) -> Optional[float]:
        # fsum is exactly rounded, hence independent of evaluation order
        traded = self.traded
        if not traded:
            return None
        return math.fsum(t.daily_avg_return for t in traded) / len(traded)

    @property
    def reference_avg(self) -> Optional[float]:
        traded = self.traded
        if not traded:
            return None
        return math.fsum(t.reference_daily_avg for t in traded) / len(traded)


def reference_return(day: int, q: int, prices: PriceTable, index: Optional[str] = None) -> float:
    """Daily average of the index's own ``q``-day round trip from ``day``."""
    col = prices.column(index or prices.index_column)
    if day < 0 or day + q >= len(col):
        raise IndexError(f"day {day} + {q} outside price history of {len(col)} rows")
    return ((col[day + q] - col[day]) / col[day]) / q


class _Inputs:
    """Contiguous arrays the day-loop kernel consumes."""

    def __init__(self, prices: PriceTable, returns: ReturnTable, params: StrategyParams):
        if returns.assets != prices.assets or len(returns) != len(prices) - 1:
            raise ValueError("returns do not belong to this price table")
        self.assets = params.assets(prices)
        self.log = returns.log_columns(self.assets)
        self.index_log = returns.log_column(prices.index_column)
        self.prices = prices.columns(self.assets)
        self.index_prices = np.ascontiguousarray(prices.column(prices.index_column))
        self.weights = window_weights(params.window)
        self.ridge = -1.0 if params.ridge is None else float(params.ridge)


def _run_kernel(inp: _Inputs, params: StrategyParams, first: int, last: int):
    out = kernels.simulate_days(
        inp.log, inp.index_log, inp.prices, inp.index_prices, inp.weights,
        first, last, params.holding_q, float(params.multiple_k), inp.ridge,
        qp.RIDGE_REL, qp.RIDGE_FLOOR, qp.MAX_CHANGES_PER_DIM,
        qp.MULTIPLIER_TOL, qp.STEP_TOL,
    )
    status = out[1]
    bad = np.flatnonzero(status)
    if bad.size:
        c = int(bad[0])
        reason = {
            kernels.ITERATION_CAP: "QP iteration cap exceeded",
            kernels.SINGULAR: "singular QP subsystem after ridge escalation",
            kernels.NON_FINITE: "non-finite data in estimation window or index return",
        }.get(int(status[c]), f"solver status {int(status[c])}")
        raise SimulationError(first + c, reason)
    return out


def _records(inp, params, prices, first, out) -> list:
    decision, _, w, rt, ref, target, mus, lams, bound_active, ret_active, ridges = out
    q = params.holding_q
    d = len(inp.assets)
    records = []
    for c in range(decision.size):
        i = first + c
        ref_daily = float(ref[c]) / q
        code = int(decision[c])
        if code != kernels.TRADED:
            records.append(TradeRecord(i, i + q, DECISIONS[code], reference_daily_avg=ref_daily,
                                       target=float(target[c]) if code == kernels.SKIPPED_INFEASIBLE else None))
            continue
        weights = w[c].copy()
        active = tuple(int(j) for j in np.flatnonzero(bound_active[c]))
        if ret_active[c]:
            active += (d,)
        sol = qp.PortfolioSolution(
            status="optimal", weights=weights, active_set=active,
            budget_multiplier=float(mus[c]), return_multiplier=float(lams[c]),
            ridge=float(ridges[c]),
        )
        # snap to the nearest value for which daily * q == round_trip holds
        # exactly in floating point (a change of at most one ulp)
        daily = float(rt[c]) / q
        round_trip = daily * q
        records.append(TradeRecord(
            entry_day=i,
            exit_day=i + q,
            decision="traded",
            weights=weights,
            entry_prices=inp.prices[i].copy(),
            exit_prices=inp.prices[i + q].copy(),
            round_trip_return=round_trip,
            daily_avg_return=daily,
            reference_daily_avg=ref_daily,
            target=float(target[c]),
            solution=sol,
        ))
    return records


def evaluate_day(day: int, prices: PriceTable, returns: ReturnTable, params: StrategyParams) -> TradeRecord:
    """Decision and accounting for a single entry day."""
    last = len(prices) - 1
    if day < params.observation_p or day + params.holding_q > last:
        raise IndexError(
            f"day {day} outside evaluable range [{params.observation_p}, {last - params.holding_q}]")
    inp = _Inputs(prices, returns, params)
    out = _run_kernel(inp, params, day, day)
    return _records(inp, params, prices, day, out)[0]


def evaluable_range(n_prices: int, params: StrategyParams) -> range:
    return range(params.observation_p, n_prices - params.holding_q)


def run_simulation(prices: PriceTable, returns: ReturnTable, params: StrategyParams) -> SimulationResult:
    days = evaluable_range(len(prices), params)
    if not days:
        raise ValueError(
            f"no evaluable days: {len(prices)} price rows, p={params.observation_p}, q={params.holding_q}")
    inp = _Inputs(prices, returns, params)
    out = _run_kernel(inp, params, days.start, days.stop - 1)
    return SimulationResult(
        params=params,
        assets=inp.assets,
        trades=tuple(_records(inp, params, prices, days.start, out)),
        dates=prices.dates,
    )


def problem_for_day(day: int, returns: ReturnTable, params: StrategyParams, assets: Sequence[str]) -> qp.QpProblem:
    """Rebuild the QP a traded day solved (for auditing)."""
    est = estimate(returns, day, params.window, assets)
    r_idx = float(returns.log_on_day(day)[returns.assets.index(returns.index_column)])
    return qp.QpProblem(est.cov, est.mean, params.multiple_k * r_idx, params.ridge)


def write_trade_log(result: SimulationResult, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["entry_date", "exit_date", "decision", "ref_daily", "real_daily"] + [f"w_{a}" for a in result.assets])
        for t in result.trades:
            row = [result.dates[t.entry_day].isoformat(), result.dates[t.exit_day].isoformat(), t.decision,
                   repr(t.reference_daily_avg)]
            if t.traded:
                row += [repr(t.daily_avg_return)] + [repr(float(v)) for v in t.weights]
            else:
                row += [""] + [""] * len(result.assets)
            w.writerow(row)
