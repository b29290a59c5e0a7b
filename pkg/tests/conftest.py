import datetime as dt
import sys

import numpy as np
import pytest

from slidemv import synthetic
from slidemv.market_data import PriceTable, compute_returns


def make_table(prices, assets=None, index="IDX", start=dt.date(2020, 1, 1)):
    prices = np.asarray(prices, dtype=float)
    if prices.ndim == 1:
        prices = prices[:, None]
    if assets is None:
        assets = [f"S{j}" for j in range(prices.shape[1] - 1)] + [index]
    dates = [start + dt.timedelta(days=i) for i in range(prices.shape[0])]
    return PriceTable(dates=dates, assets=assets, prices=prices, index_column=index)


@pytest.fixture(scope="session")
def market_2000():
    """2000 days x 16 assets + equal-weight index, seed 42."""
    prices = synthetic.generate(synthetic.market_spec(assets=16, days=2000, seed=42))
    return prices, compute_returns(prices)


@pytest.fixture(scope="session")
def market_500():
    """500 days x 5 correlated assets + index, seed 42."""
    prices = synthetic.generate(synthetic.market_spec(assets=5, days=500, seed=42))
    return prices, compute_returns(prices)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
