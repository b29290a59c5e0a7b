"""Plot-ready CSV outputs and the readers that parse them back.

Series values are written with 6 significant digits; sweep tables in basis
points of daily return with 2 decimals.  Readers for each format live here
too so outputs can be checked by re-parsing.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .market_data import ReturnTable
from .strategy import SimulationResult
from .sweep import SweepTable

BP = 1e4


@dataclass(frozen=True)
class ScatterPoint:
    asset: str
    mean_return: float
    std_return: float


def risk_return_scatter(returns: ReturnTable) -> list:
    """Full-history mean and population std of log returns, one point per column."""
    if len(returns) == 0:
        raise ValueError("empty return history")
    mean = returns.log.mean(axis=0)
    std = returns.log.std(axis=0)
    return [ScatterPoint(a, float(m), float(s)) for a, m, s in zip(returns.assets, mean, std)]


def write_scatter_csv(points, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("asset", "mean", "std"))
        for pt in points:
            w.writerow((pt.asset, f"{pt.mean_return:.6g}", f"{pt.std_return:.6g}"))


def read_scatter_csv(path) -> list:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return [ScatterPoint(r["asset"], float(r["mean"]), float(r["std"])) for r in csv.DictReader(fh)]


def _g(v) -> str:
    return "" if v is None else f"{v:.6g}"


def emit_run_series(result: SimulationResult, path) -> dict:
    """Write one row per evaluated day; skipped days carry only their decision.

    Returns the summary that is also written as the trailing comment block.
    """
    if not result.trades:
        raise ValueError("empty simulation result")
    prm = result.params
    traded = [t.daily_avg_return for t in result.trades if t.traded]
    summary = {
        "trades": result.trade_count,
        **result.skip_counts,
        "real_avg": result.real_avg,
        "reference_avg": result.reference_avg,
        "portfolio_min": min(traded) if traded else None,
        "portfolio_max": max(traded) if traded else None,
    }
    buf = io.StringIO()
    buf.write(f"# k={prm.multiple_k:g} p={prm.observation_p} q={prm.holding_q} "
              f"window={prm.window.shape} convention={prm.convention}\n")
    buf.write(f"# assets={' '.join(result.assets)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("date", "portfolio_daily", "reference_daily", "decision"))
    for t in result.trades:
        date = result.dates[t.entry_day].isoformat()
        if t.traded:
            w.writerow((date, _g(t.daily_avg_return), _g(t.reference_daily_avg), t.decision))
        else:
            w.writerow((date, "", "", t.decision))
    for key, val in summary.items():
        buf.write(f"# {key}={_g(val) if isinstance(val, float) else ('' if val is None else val)}\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")
    return summary


def read_run_series(path):
    """Returns ``(rows, summary)``; blank numeric cells come back as None."""
    rows, summary = [], {}
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            if "=" in line and not line.startswith("# k=") and not line.startswith("# assets="):
                key, _, val = line[2:].partition("=")
                summary[key] = float(val) if val else None
        else:
            body.append(line)
    for r in csv.DictReader(body):
        rows.append({
            "date": r["date"],
            "portfolio_daily": float(r["portfolio_daily"]) if r["portfolio_daily"] else None,
            "reference_daily": float(r["reference_daily"]) if r["reference_daily"] else None,
            "decision": r["decision"],
        })
    return rows, summary


def _bp(v) -> str:
    return f"{v * BP:.2f}"


def sweep_rows(table: SweepTable) -> list:
    grid = table.grid
    rows = []
    for bi, k in enumerate(grid.k_values):
        if bi:
            rows.append([])
        width = 1 + 2 * len(grid.holding_lengths)
        rows.append([f"For k={k:g}", "Trading Period(Days)"] + [""] * (width - 2))
        head = ["Observation Period(Days)"]
        for q in grid.holding_lengths:
            head += [str(q), ""]
        rows.append(head)
        rows.append([""] + ["Reference", "Real"] * len(grid.holding_lengths))
        for p in grid.observation_lengths:
            row = [str(p)]
            for q in grid.holding_lengths:
                cell = table.cells[(k, p, q)]
                row += ["", ""] if cell.empty else [_bp(cell.reference_avg), _bp(cell.real_avg)]
            rows.append(row)
    return rows


def emit_sweep_csv(table: SweepTable, path) -> None:
    """Table-shaped CSV with one block per k and a Reference/Real column pair
    per holding length.  Cells without trades stay blank."""
    if not table.cells:
        raise ValueError("empty sweep table")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        csv.writer(fh, lineterminator="\n").writerows(sweep_rows(table))


def read_sweep_csv(path) -> dict:
    """Parse :func:`emit_sweep_csv` output into ``{(k, p, q): (ref_bp, real_bp) | None}``."""
    out = {}
    k = None
    holds = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or not any(row):
                continue
            if row[0].startswith("For k="):
                k = float(row[0][len("For k="):])
            elif row[0] == "Observation Period(Days)":
                holds = [int(v) for v in row[1::2] if v]
            elif row[0] == "":
                continue
            else:
                p = int(row[0])
                for j, q in enumerate(holds):
                    ref, real = row[1 + 2 * j], row[2 + 2 * j]
                    out[(k, p, q)] = None if ref == "" else (float(ref), float(real))
    return out


def emit_cells_csv(table: SweepTable, path) -> None:
    """Long-format companion to the sweep table at full precision."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("k", "p", "q", "evaluable", "trades", "skipped_index_down", "skipped_infeasible",
                    "reference_avg", "real_avg", "reason"))
        for (k, p, q), c in table.cells.items():
            w.writerow((f"{k:g}", p, q, int(c.evaluable), c.trade_count, c.skipped_index_down,
                        c.skipped_infeasible,
                        "" if c.reference_avg is None else repr(c.reference_avg),
                        "" if c.real_avg is None else repr(c.real_avg), c.reason))


def series_extrema(values) -> tuple:
    a = np.asarray([v for v in values if v is not None], dtype=float)
    return float(a.min()), float(a.max())
