"""Sliding-window Markowitz backtests with a long-only QP and fixed holding periods."""

__version__ = "0.1.0"

from .estimator import EstimateSet, WindowSpec, estimate, rolling_stats, window_weights  # noqa: E402
from .market_data import DataError, PriceTable, ReturnTable, compute_returns, load_prices  # noqa: E402
from .qp import PortfolioSolution, QpProblem, SolverError, is_feasible, regularize, solve, verify_kkt  # noqa: E402
from .strategy import (  # noqa: E402
    SimulationResult, StrategyParams, TradeRecord, evaluate_day, reference_return, run_simulation,
)
from .sweep import SweepGrid, SweepTable, best_cell, run_sweep  # noqa: E402
from .synthetic import SynthSpec, generate  # noqa: E402
