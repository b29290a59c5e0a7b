import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_table
from slidemv.market_data import DataError, PriceTable, compute_returns, load_prices, write_prices


def write_csv(path, header, rows):
    path.write_text("\n".join([",".join(header)] + [",".join(map(str, r)) for r in rows]) + "\n")
    return path


def test_load_constant_file(tmp_path):
    f = write_csv(tmp_path / "p.csv", ["date", "A", "IDX"],
                  [["2020-01-01", 100, 100], ["2020-01-02", 100, 100], ["2020-01-03", 100, 100]])
    t = load_prices(f, "IDX")
    assert len(t.dates) == 3
    assert t.assets == ("A", "IDX")
    assert t.index_column == "IDX"


def test_zero_price_names_location(tmp_path):
    f = write_csv(tmp_path / "p.csv", ["date", "A", "IDX"],
                  [["2020-01-01", 100, 100], ["2020-01-02", 0.0, 100]])
    with pytest.raises(DataError, match=r"line 3, column 'A'"):
        load_prices(f, "IDX")


def test_shuffled_rows_are_sorted(tmp_path):
    rng = random.Random(7)
    rows = [[f"2020-01-{d:02d}", 100 + d, 50 + 2 * d] for d in range(1, 21)]
    shuffled = rows[:]
    rng.shuffle(shuffled)
    a = load_prices(write_csv(tmp_path / "a.csv", ["date", "A", "IDX"], rows), "IDX")
    b = load_prices(write_csv(tmp_path / "b.csv", ["date", "A", "IDX"], shuffled), "IDX")
    assert a == b
    assert list(b.dates) == sorted(b.dates)


@pytest.mark.parametrize("rows,pattern", [
    ([["2020-01-01", 1, 1], ["2020-01-01", 2, 2]], "duplicate date"),
    ([["2020-01-01", "", 1]], "missing value"),
    ([["2020-01-01", "x", 1]], "not a number"),
    ([["2020-01-01", -3, 1]], "not positive"),
    ([["2020-13-01", 1, 1]], "bad ISO date"),
    ([["2020-01-01", 1]], "expected 3 fields"),
])
def test_malformed_rows(tmp_path, rows, pattern):
    f = write_csv(tmp_path / "p.csv", ["date", "A", "IDX"], rows)
    with pytest.raises(DataError, match=pattern):
        load_prices(f, "IDX")


def test_missing_index_column(tmp_path):
    f = write_csv(tmp_path / "p.csv", ["date", "A", "B"], [["2020-01-01", 1, 1]])
    with pytest.raises(DataError, match="index column 'IDX' missing"):
        load_prices(f, "IDX")


def test_bad_header(tmp_path):
    f = write_csv(tmp_path / "p.csv", ["day", "A"], [["2020-01-01", 1]])
    with pytest.raises(DataError, match="first header"):
        load_prices(f, "A")


def test_price_table_is_immutable():
    t = make_table([[1.0, 2.0], [1.5, 2.5]])
    with pytest.raises(ValueError):
        t.prices[0, 0] = 3.0


def test_write_load_round_trip(tmp_path):
    t = make_table(np.array([[100.0, 1 / 3], [101.123456789012345, 2 / 7]]))
    write_prices(t, tmp_path / "x.csv")
    assert load_prices(tmp_path / "x.csv", "IDX") == t


@pytest.mark.parametrize("convention", ["paper", "standard"])
def test_flat_price(convention):
    r = compute_returns(make_table([100.0, 100.0]), convention)
    assert r.simple[0, 0] == 0.0 and r.log[0, 0] == 0.0


def test_standard_convention_value():
    r = compute_returns(make_table([100.0, 110.0]), "standard")
    assert r.simple[0, 0] == pytest.approx(0.10, abs=1e-15)
    assert r.log[0, 0] == pytest.approx(0.09531, abs=1e-5)
    assert r.log[0, 0] == pytest.approx(math.log(1.1), rel=1e-15)


def test_paper_convention_value():
    # hand: 10/110 = 0.0909090..., ln(1 + 1/11) = ln(12/11) = 0.0870113769896...
    r = compute_returns(make_table([100.0, 110.0]))
    assert r.convention == "paper"
    assert r.simple[0, 0] == pytest.approx(0.0909090909090909, rel=1e-14)
    assert r.log[0, 0] == pytest.approx(0.087011, abs=1e-6)
    assert r.log[0, 0] == pytest.approx(math.log(12 / 11), rel=1e-14)


def test_paper_convention_rejects_halving():
    with pytest.raises(DataError, match="<= -1"):
        compute_returns(make_table([100.0, 50.0]), "paper")
    assert compute_returns(make_table([100.0, 50.0]), "standard").simple[0, 0] == -0.5


def test_needs_two_rows():
    with pytest.raises(DataError):
        compute_returns(make_table([100.0]))


def test_unknown_convention():
    with pytest.raises(ValueError):
        compute_returns(make_table([1.0, 2.0]), "weird")


def test_return_table_shape_and_dates():
    t = make_table(np.linspace(100, 120, 11)[:, None] * np.array([[1.0, 2.0]]))
    r = compute_returns(t)
    assert r.log.shape == (10, 2)
    assert r.dates == t.dates[1:]
    np.testing.assert_array_equal(r.log_on_day(3), r.log[2])


prices_strategy = st.lists(st.floats(min_value=1.0, max_value=1e4), min_size=2, max_size=60)


@settings(max_examples=200, deadline=None)
@given(prices_strategy)
def test_log_simple_round_trip(ps):
    r = compute_returns(make_table(ps), "standard")
    # expm1 amplifies the ulp error of log1p(x) by about |log1p(x)|
    tol = 2 * np.finfo(float).eps * (1 + np.abs(r.log)) * np.abs(r.simple)
    assert np.all(np.abs(np.expm1(r.log) - r.simple) <= tol)
    assert np.array_equal(r.log, np.log1p(r.simple))


@settings(max_examples=200, deadline=None)
@given(prices_strategy)
def test_standard_compounding(ps):
    r = compute_returns(make_table(ps), "standard")
    # a crash from a to b leaves 1 + r ~ b/a, so an eps-sized error in r is
    # amplified by a/b in relative terms
    tol = 8 * np.finfo(float).eps * len(ps) * max(ps) / min(ps)
    assert np.prod(1 + r.simple[:, 0]) == pytest.approx(ps[-1] / ps[0], rel=max(tol, 1e-12))


def test_deterministic_bitwise(market_500):
    prices, _ = market_500
    a, b = compute_returns(prices), compute_returns(prices)
    assert a.log.tobytes() == b.log.tobytes() and a.simple.tobytes() == b.simple.tobytes()


def test_price_table_rejects_unsorted_dates():
    import datetime as dt
    with pytest.raises(DataError):
        PriceTable(dates=[dt.date(2020, 1, 2), dt.date(2020, 1, 1)], assets=["IDX"],
                   prices=[[1.0], [1.0]], index_column="IDX")
