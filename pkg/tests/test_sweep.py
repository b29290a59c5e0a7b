import numpy as np
import pytest

from slidemv.market_data import compute_returns
from slidemv.strategy import run_simulation
from slidemv.sweep import SweepCell, SweepGrid, SweepTable, best_cell, fingerprint, run_sweep
from table1 import table1


def _same_cell(a, b):
    assert (a.evaluable, a.trade_count, a.skipped_index_down, a.skipped_infeasible) == \
        (b.evaluable, b.trade_count, b.skipped_index_down, b.skipped_infeasible)
    assert a.real_avg == b.real_avg and a.reference_avg == b.reference_avg


@pytest.mark.parametrize("kw", [
    dict(k_values=(), observation_lengths=(50,), holding_lengths=(21,)),
    dict(k_values=(2,), observation_lengths=(50, 50), holding_lengths=(21,)),
    dict(k_values=(2,), observation_lengths=(50,), holding_lengths=(0,)),
    dict(k_values=(-1,), observation_lengths=(50,), holding_lengths=(21,)),
])
def test_grid_validation(kw):
    with pytest.raises(ValueError):
        SweepGrid(**kw)


def test_two_cells_equal_single_runs(market_500):
    prices, returns = market_500
    grid = SweepGrid((2.0,), (50,), (21, 42))
    table = run_sweep(prices, returns, grid)
    assert list(table.cells) == [(2.0, 50, 21), (2.0, 50, 42)]
    for key, cell in table.cells.items():
        res = run_simulation(prices, returns, grid.params(*key))
        _same_cell(cell, SweepCell.from_result(*key, res))


def test_impossible_cell_not_evaluable(market_500):
    prices, returns = market_500
    table = run_sweep(prices, returns, SweepGrid((2.0,), (50, 300), (21, 200)))
    bad = table.cell(2.0, 300, 200)
    assert not bad.evaluable and bad.empty and "p + q" in bad.reason
    assert table.cell(2.0, 300, 21).evaluable
    assert table.cell(2.0, 50, 200).evaluable


def test_span_fraction_policy(market_500):
    prices, returns = market_500
    table = run_sweep(prices, returns, SweepGrid((2.0,), (50,), (21, 200), max_span_fraction=0.4))
    assert table.cell(2.0, 50, 21).evaluable
    assert not table.cell(2.0, 50, 200).evaluable


def test_permuted_grid_identical(market_500):
    prices, returns = market_500
    a = run_sweep(prices, returns, SweepGrid((2.0, 3.0), (50, 100), (21, 42)))
    b = run_sweep(prices, returns, SweepGrid((3.0, 2.0), (100, 50), (42, 21)))
    assert set(a.cells) == set(b.cells)
    for key in a.cells:
        _same_cell(a.cells[key], b.cells[key])


def test_parallel_matches_serial(market_500):
    prices, returns = market_500
    grid = SweepGrid((2.0, 10.0), (50, 100), (21, 63))
    a = run_sweep(prices, returns, grid, jobs=1)
    b = run_sweep(prices, returns, grid, jobs=3)
    assert list(a.cells) == list(b.cells)
    for key in a.cells:
        _same_cell(a.cells[key], b.cells[key])


def test_keep_results_and_recompute(market_500):
    prices, returns = market_500
    table = run_sweep(prices, returns, SweepGrid((2.0,), (50,), (21,)), keep_results=True)
    res = table.results[(2.0, 50, 21)]
    cell = table.cell(2.0, 50, 21)
    assert cell.trade_count == res.trade_count
    assert cell.real_avg == pytest.approx(np.mean([t.daily_avg_return for t in res.traded]), abs=1e-12)


def test_convention_mismatch(market_500):
    prices, _ = market_500
    with pytest.raises(ValueError, match="convention"):
        run_sweep(prices, compute_returns(prices, "standard"), SweepGrid((2.0,), (50,), (21,)))


def test_fingerprint_tracks_data(market_500):
    prices, _ = market_500
    assert fingerprint(prices) == fingerprint(prices)
    assert len(fingerprint(prices)) == 16


# -- best_cell ----------------------------------------------------------------

def _table(cells):
    grid = SweepGrid((2,), tuple(sorted({c.p for c in cells})), tuple(sorted({c.q for c in cells})))
    return SweepTable(grid=grid, cells={(c.k, c.p, c.q): c for c in cells})


def _cell(p, q, real, trades=1):
    return SweepCell(2, p, q, evaluable=True, reference_avg=0.0, real_avg=real, trade_count=trades)


def test_best_single_cell():
    assert best_cell(_table([_cell(50, 21, -1.0)]), 2) == (50, 21)


def test_best_tie_prefers_smaller_p_then_q():
    t = _table([_cell(100, 21, 5.0), _cell(50, 42, 5.0), _cell(50, 63, 5.0), _cell(150, 21, 4.0)])
    assert best_cell(t, 2) == (50, 42)


def test_best_ignores_empty_cells():
    t = _table([_cell(50, 21, 9.0, trades=0), _cell(100, 21, 1.0)])
    assert best_cell(t, 2) == (100, 21)
    with pytest.raises(ValueError):
        best_cell(_table([_cell(50, 21, 9.0, trades=0)]), 2)
    with pytest.raises(ValueError):
        best_cell(t, 3)


def test_best_on_printed_table():
    table = table1()
    assert best_cell(table, 2) == (50, 42)
    assert table.cell(2, 50, 42).real_avg * 1e4 == pytest.approx(8.27)
    assert best_cell(table, 3) == (50, 42)
    assert best_cell(table, 10) == (50, 42)
