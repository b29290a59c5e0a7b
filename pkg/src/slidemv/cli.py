"""Command-line entry point (``slidemv``).

Exit status: 0 success, 1 data/config error, 2 numerical failure.
Every option can also come from an INI file passed with ``--config``
(keys in a ``[slidemv]`` section, named like the long flags); explicit
flags win over the file.
"""
from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, estimator, market_data, qp, report, strategy, sweep, synthetic

log = logging.getLogger("slidemv")

EXIT_OK, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2

WINDOW_NAMES = {"rect": "rectangular", "halfgauss": "half_gaussian"}

DEFAULTS = {
    "index": "INDEX",
    "k": "2",
    "obs": "50",
    "hold": "21",
    "window": "rect",
    "sigma": None,
    "ridge": None,
    "convention": "paper",
    "seed": "42",
    "jobs": "1",
    "out_dir": ".",
    "investable": None,
    "assets": "16",
    "days": "2000",
    "drift": None,
    "vol": None,
    "cov": None,
    "asset": None,
    "max_span_fraction": None,
}


class ConfigError(ValueError):
    pass


class _Settings:
    """Flag value if given, else config-file value, else default (all as strings)."""

    def __init__(self, args, config):
        self._args = args
        self._config = config

    def raw(self, key):
        v = getattr(self._args, key, None)
        if v is not None:
            return v
        if key in self._config:
            return self._config[key]
        return DEFAULTS.get(key)

    def str(self, key, required=False):
        v = self.raw(key)
        if v is None and required:
            raise ConfigError(f"missing required setting --{key.replace('_', '-')}")
        return None if v is None else str(v)

    def int(self, key):
        v = self.raw(key)
        try:
            return None if v is None else int(v)
        except ValueError:
            raise ConfigError(f"--{key}: expected an integer, got {v!r}") from None

    def float(self, key):
        v = self.raw(key)
        try:
            return None if v is None else float(v)
        except ValueError:
            raise ConfigError(f"--{key}: expected a number, got {v!r}") from None

    def list(self, key, cast):
        v = self.raw(key)
        if v is None:
            return None
        try:
            return tuple(cast(x) for x in str(v).replace(" ", "").split(",") if x)
        except ValueError:
            raise ConfigError(f"--{key}: bad list {v!r}") from None


def _load_config(path) -> dict:
    if path is None:
        return {}
    cp = configparser.ConfigParser()
    if not cp.read(path, encoding="utf-8"):
        raise ConfigError(f"cannot read config file {path}")
    section = cp["slidemv"] if cp.has_section("slidemv") else cp.defaults()
    return {k.replace("-", "_"): v for k, v in section.items()}


def _out_dir(s: _Settings) -> Path:
    out = Path(s.str("out_dir"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _window_shape(s: _Settings) -> str:
    name = s.str("window")
    if name not in WINDOW_NAMES:
        raise ConfigError(f"--window must be one of {sorted(WINDOW_NAMES)}, got {name!r}")
    return WINDOW_NAMES[name]


def _load(s: _Settings):
    prices = market_data.load_prices(s.str("data", required=True), s.str("index"))
    returns = market_data.compute_returns(prices, s.str("convention"))
    return prices, returns


def _fmt(v) -> str:
    return "n/a" if v is None else f"{v:.10g}"


def cmd_ingest(s: _Settings) -> int:
    prices = market_data.load_prices(s.str("data", required=True), s.str("index"))
    # the index is the benchmark, not one of the assets
    print(f"{len(prices.non_index_assets)} assets, {prices.dates[0]}..{prices.dates[-1]}, {len(prices)} rows")
    print(f"index: {prices.index_column}")
    return EXIT_OK


def _params(s: _Settings, k, p, q) -> strategy.StrategyParams:
    return strategy.StrategyParams(
        observation_p=p, holding_q=q, multiple_k=k,
        window=estimator.WindowSpec(p, _window_shape(s), s.float("sigma")),
        investable=s.list("investable", str), convention=s.str("convention"), ridge=s.float("ridge"),
    )


def cmd_backtest(s: _Settings) -> int:
    prices, returns = _load(s)
    params = _params(s, s.float("k"), s.int("obs"), s.int("hold"))
    result = strategy.run_simulation(prices, returns, params)
    out = _out_dir(s)
    tag = f"k{params.multiple_k:g}_p{params.observation_p}_q{params.holding_q}"
    series = out / f"run_{tag}.csv"
    summary = report.emit_run_series(result, series)
    strategy.write_trade_log(result, out / f"trades_{tag}.csv")
    print(f"k={params.multiple_k:g} p={params.observation_p} q={params.holding_q}")
    print(f"trades: {summary['trades']}")
    print(f"skipped_index_down: {summary['skipped_index_down']}")
    print(f"skipped_infeasible: {summary['skipped_infeasible']}")
    print(f"real_avg: {_fmt(summary['real_avg'])}")
    print(f"reference_avg: {_fmt(summary['reference_avg'])}")
    log.info("wrote %s", series)
    return EXIT_OK


def cmd_sweep(s: _Settings) -> int:
    prices, returns = _load(s)
    grid = sweep.SweepGrid(
        k_values=s.list("k", float),
        observation_lengths=s.list("obs", int),
        holding_lengths=s.list("hold", int),
        window_shape=_window_shape(s),
        sigma=s.float("sigma"),
        convention=s.str("convention"),
        investable=s.list("investable", str),
        ridge=s.float("ridge"),
        max_span_fraction=s.float("max_span_fraction"),
    )
    t0 = time.perf_counter()
    table = sweep.run_sweep(prices, returns, grid, jobs=s.int("jobs"))
    log.info("sweep of %d cells took %.2fs", len(table.cells), time.perf_counter() - t0)
    out = _out_dir(s)
    report.emit_sweep_csv(table, out / "sweep_table.csv")
    report.emit_cells_csv(table, out / "sweep_cells.csv")
    for key, cell in table.cells.items():
        if not cell.evaluable:
            print(f"not-evaluable k={key[0]:g} p={key[1]} q={key[2]}: {cell.reason}")
    for k in grid.k_values:
        try:
            p, q = sweep.best_cell(table, k)
        except ValueError:
            print(f"best k={k:g}: none")
            continue
        c = table.cells[(k, p, q)]
        print(f"best k={k:g}: p={p} q={q} real_avg={_fmt(c.real_avg)} reference_avg={_fmt(c.reference_avg)}")
    return EXIT_OK


def _read_matrix(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def cmd_synth(s: _Settings) -> int:
    seed = s.int("seed")
    d, days = s.int("assets"), s.int("days")
    drift = s.float("drift")
    if s.str("cov") is not None:
        cov = _read_matrix(s.str("cov"))
        spec = synthetic.SynthSpec(mean=np.full(cov.shape[0], drift or 0.0), cov=cov, days=days, seed=seed)
    elif s.float("vol") is not None:
        vol = s.float("vol")
        spec = synthetic.SynthSpec(mean=np.full(d, drift or 0.0), cov=np.eye(d) * vol * vol, days=days, seed=seed)
    else:
        kw = {} if drift is None else {"drift": drift}
        spec = synthetic.market_spec(assets=d, days=days, seed=seed, **kw)
    prices = synthetic.generate(spec)
    path = _out_dir(s) / s.str("output")
    market_data.write_prices(prices, path)
    print(f"seed: {seed}")
    print(f"wrote {path}: {spec.assets} assets + {prices.index_column}, {len(prices)} rows")
    return EXIT_OK


def _read_problem(path) -> qp.QpProblem:
    path = Path(path)
    if path.suffix.lower() == ".json":
        doc = json.loads(path.read_text(encoding="utf-8"))
        return qp.QpProblem(np.array(doc["Q"], dtype=float), np.array(doc["R"], dtype=float),
                            float(doc["R0"]), doc.get("ridge"))
    # CSV: rows tagged Q (repeated), R, R0 and optionally ridge
    Q, R, R0, ridge = [], None, None, None
    for line in path.read_text(encoding="utf-8").splitlines():
        parts = [p.strip() for p in line.split(",")]
        if not parts or not parts[0]:
            continue
        tag, vals = parts[0], [float(v) for v in parts[1:] if v]
        if tag == "Q":
            Q.append(vals)
        elif tag == "R":
            R = vals
        elif tag == "R0":
            R0 = vals[0]
        elif tag == "ridge":
            ridge = vals[0]
        else:
            raise ConfigError(f"{path}: unknown row tag {tag!r}")
    if not Q or R is None or R0 is None:
        raise ConfigError(f"{path}: need Q rows, an R row and an R0 row")
    return qp.QpProblem(np.array(Q), np.array(R), R0, ridge)


def cmd_solve_debug(s: _Settings) -> int:
    problem = _read_problem(s.str("problem", required=True))
    sol = qp.solve(problem)
    print(f"status: {sol.status}")
    if sol.optimal:
        rep = qp.verify_kkt(problem, sol)
        print("weights: " + ",".join(f"{v:.10g}" for v in sol.weights))
        print(f"objective: {sol.objective:.10g}")
        print(f"active_set: {list(sol.active_set)}")
        print(f"kkt_residual: {sol.kkt_residual:.3e}")
        print("kkt_gaps: " + ", ".join(f"{k}={v:.3e}" for k, v in rep.gaps.items()))
        print(f"kkt_flags: {rep.flags or 'none'}")
    return EXIT_OK


def cmd_rolling_stats(s: _Settings) -> int:
    prices, returns = _load(s)
    asset = s.str("asset") or prices.index_column
    spec = estimator.WindowSpec(s.int("obs"), _window_shape(s), s.float("sigma"))
    stats = estimator.rolling_stats(returns, asset, spec)
    path = _out_dir(s) / f"rolling_{asset}_n{spec.length_n}.csv"
    estimator.write_rolling_csv(stats, path)
    print(f"wrote {path}: {stats.days.size} points")
    return EXIT_OK


def cmd_scatter(s: _Settings) -> int:
    prices, returns = _load(s)
    points = report.risk_return_scatter(returns)
    path = _out_dir(s) / "scatter.csv"
    report.write_scatter_csv(points, path)
    print(f"wrote {path}: {len(points)} points")
    return EXIT_OK


COMMANDS = {
    "ingest": cmd_ingest,
    "backtest": cmd_backtest,
    "sweep": cmd_sweep,
    "synth": cmd_synth,
    "solve-debug": cmd_solve_debug,
    "rolling-stats": cmd_rolling_stats,
    "scatter": cmd_scatter,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with a [slidemv] section")
    common.add_argument("--out-dir", dest="out_dir")
    common.add_argument("-v", "--verbose", action="count", default=0)

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--data", help="price CSV (date,<asset>,...)")
    data.add_argument("--index", help="index column (default INDEX)")
    data.add_argument("--convention", choices=("paper", "standard"))

    strat = argparse.ArgumentParser(add_help=False)
    strat.add_argument("--k", help="target multiple(s) of the index return")
    strat.add_argument("--obs", help="observation length(s) in days")
    strat.add_argument("--hold", help="holding length(s) in days")
    strat.add_argument("--window", choices=tuple(WINDOW_NAMES))
    strat.add_argument("--sigma", help="half-Gaussian width in days (default obs/2)")
    strat.add_argument("--ridge", help="absolute ridge (default: 1e-8 * trace/d)")
    strat.add_argument("--investable", help="comma-separated assets (default: all but the index)")

    parser = argparse.ArgumentParser(prog="slidemv", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("ingest", parents=[common, data], help="validate a price CSV")
    sub.add_parser("backtest", parents=[common, data, strat], help="one (k, p, q) simulation")
    sp = sub.add_parser("sweep", parents=[common, data, strat], help="grid of simulations")
    sp.add_argument("--jobs")
    sp.add_argument("--max-span-fraction", dest="max_span_fraction")

    sy = sub.add_parser("synth", parents=[common], help="write a synthetic price CSV")
    sy.add_argument("--seed")
    sy.add_argument("--assets")
    sy.add_argument("--days")
    sy.add_argument("--drift")
    sy.add_argument("--vol", help="i.i.d. assets with this daily vol instead of the factor model")
    sy.add_argument("--cov", help="CSV covariance matrix")
    sy.add_argument("--output", default="synthetic.csv")

    sd = sub.add_parser("solve-debug", parents=[common], help="solve one QP from JSON/CSV")
    sd.add_argument("problem")

    rs = sub.add_parser("rolling-stats", parents=[common, data], help="windowed mean/std curve")
    rs.add_argument("--asset")
    rs.add_argument("--obs")
    rs.add_argument("--window", choices=tuple(WINDOW_NAMES))
    rs.add_argument("--sigma")

    sub.add_parser("scatter", parents=[common, data], help="full-period mean/std per asset")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        settings = _Settings(args, _load_config(args.config))
        return COMMANDS[args.command](settings)
    except (qp.SolverError, strategy.SimulationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (market_data.DataError, ConfigError, ValueError, IndexError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
