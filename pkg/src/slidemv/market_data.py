"""Price ingestion and daily return series."""
from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

CONVENTIONS = ("paper", "standard")


class DataError(ValueError):
    """Malformed or invalid market data; the message carries the location."""


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True, order="C")
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class PriceTable:
    """Closing prices, one row per trading day and one column per asset.

    The market index is one of the columns (``index_column``).
    """

    dates: tuple
    assets: tuple
    prices: np.ndarray
    index_column: str

    def __post_init__(self):
        dates = tuple(self.dates)
        assets = tuple(str(a) for a in self.assets)
        prices = _frozen(self.prices)
        if prices.ndim != 2 or prices.shape != (len(dates), len(assets)):
            raise DataError(f"price matrix shape {prices.shape} does not match {len(dates)} dates x {len(assets)} assets")
        if len(set(assets)) != len(assets):
            raise DataError("duplicate asset identifiers")
        if self.index_column not in assets:
            raise DataError(f"index column {self.index_column!r} not among assets")
        for a, b in zip(dates, dates[1:]):
            if not a < b:
                raise DataError(f"dates not strictly increasing at {b}")
        bad = np.argwhere(~(np.isfinite(prices) & (prices > 0)))
        if bad.size:
            r, c = bad[0]
            raise DataError(f"row {r} ({dates[r]}), column {assets[c]!r}: price {prices[r, c]!r} is not positive and finite")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "assets", assets)
        object.__setattr__(self, "prices", prices)

    def __len__(self):
        return len(self.dates)

    def __eq__(self, other):
        if not isinstance(other, PriceTable):
            return NotImplemented
        return (
            self.dates == other.dates
            and self.assets == other.assets
            and self.index_column == other.index_column
            and np.array_equal(self.prices, other.prices)
        )

    def column(self, asset: str) -> np.ndarray:
        return self.prices[:, self.assets.index(asset)]

    def columns(self, assets: Sequence[str]) -> np.ndarray:
        idx = [self.assets.index(a) for a in assets]
        return np.ascontiguousarray(self.prices[:, idx])

    @property
    def non_index_assets(self) -> tuple:
        return tuple(a for a in self.assets if a != self.index_column)


@dataclass(frozen=True, eq=False)
class ReturnTable:
    """Simple and log returns; row ``t`` is the move into price day ``t + 1``."""

    dates: tuple
    assets: tuple
    simple: np.ndarray
    log: np.ndarray
    index_column: str
    convention: str = "paper"

    def __post_init__(self):
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "assets", tuple(self.assets))
        object.__setattr__(self, "simple", _frozen(self.simple))
        object.__setattr__(self, "log", _frozen(self.log))

    def __len__(self):
        return len(self.dates)

    def log_columns(self, assets: Sequence[str]) -> np.ndarray:
        idx = [self.assets.index(a) for a in assets]
        return np.ascontiguousarray(self.log[:, idx])

    def log_column(self, asset: str) -> np.ndarray:
        return np.ascontiguousarray(self.log[:, self.assets.index(asset)])

    def log_on_day(self, day: int) -> np.ndarray:
        """Log returns realised on price-calendar day ``day`` (>= 1)."""
        if not 1 <= day <= len(self.dates):
            raise IndexError(f"day {day} has no return (valid: 1..{len(self.dates)})")
        return self.log[day - 1]


def _parse_date(text: str, line: int) -> dt.date:
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise DataError(f"line {line}, column 'date': bad ISO date {text!r}") from None


def load_prices(path, index_id: str) -> PriceTable:
    """Read a ``date,<asset>,...`` CSV into a validated :class:`PriceTable`.

    Rows may arrive in any order and are sorted by date.  Bad cells and
    duplicate dates are rejected with the offending line/column in the message.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if not header or header[0].lstrip("﻿") != "date":
            raise DataError(f"{path}: first header must be 'date', got {header[:1]}")
        assets = header[1:]
        if not assets:
            raise DataError(f"{path}: no asset columns")
        if len(set(assets)) != len(assets):
            raise DataError(f"{path}: duplicate asset columns")
        if index_id not in assets:
            raise DataError(f"{path}: index column {index_id!r} missing (have {', '.join(assets)})")

        dates, rows = [], []
        seen = {}
        for line, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: line {line}: expected {len(header)} fields, got {len(row)}")
            date = _parse_date(row[0], line)
            if date in seen:
                raise DataError(f"{path}: line {line}: duplicate date {date} (first on line {seen[date]})")
            seen[date] = line
            values = []
            for name, cell in zip(assets, row[1:]):
                cell = cell.strip()
                if not cell:
                    raise DataError(f"{path}: line {line}, column {name!r}: missing value")
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(f"{path}: line {line}, column {name!r}: not a number {cell!r}") from None
                if not (np.isfinite(v) and v > 0):
                    raise DataError(f"{path}: line {line}, column {name!r}: price {cell} is not positive")
                values.append(v)
            dates.append(date)
            rows.append(values)

    if not rows:
        raise DataError(f"{path}: no data rows")
    order = sorted(range(len(dates)), key=dates.__getitem__)
    return PriceTable(
        dates=tuple(dates[i] for i in order),
        assets=tuple(assets),
        prices=np.array([rows[i] for i in order], dtype=float),
        index_column=index_id,
    )


def write_prices(table: PriceTable, path) -> None:
    # repr() keeps full double precision so a reload is bit-identical
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("date",) + table.assets)
        for date, row in zip(table.dates, table.prices):
            w.writerow([date.isoformat()] + [repr(float(v)) for v in row])


def compute_returns(prices: PriceTable, convention: str = "paper") -> ReturnTable:
    """Daily simple and log returns.

    ``paper`` divides the price change by the *current* price,
    ``(P_t - P_{t-1}) / P_t``; ``standard`` by the previous one. Either way
    ``log = log1p(simple)``.
    """
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown return convention {convention!r}")
    P = prices.prices
    if P.shape[0] < 2:
        raise DataError("need at least 2 price rows to form returns")
    delta = P[1:] - P[:-1]
    simple = delta / (P[1:] if convention == "paper" else P[:-1])
    bad = np.argwhere(~(simple > -1.0))
    if bad.size:
        r, c = bad[0]
        raise DataError(
            f"row {r + 1} ({prices.dates[r + 1]}), column {prices.assets[c]!r}: "
            f"simple return {simple[r, c]:.6g} <= -1 under {convention!r} convention"
        )
    return ReturnTable(
        dates=prices.dates[1:],
        assets=prices.assets,
        simple=simple,
        log=np.log1p(simple),
        index_column=prices.index_column,
        convention=convention,
    )
