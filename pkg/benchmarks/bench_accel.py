"""Numba kernels vs. the plain numpy/Python fallback.

    python3 benchmarks/bench_accel.py [--repeat 5] [--days 600] [--assets 8]

Kernel timings run in-process (jitted dispatcher vs. ``py_func`` / numpy
twin).  The end-to-end timing runs one backtest cell in two subprocesses,
one with ``SLIDEMV_DISABLE_JIT=1``.
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from slidemv import kernels
from slidemv._accel import JIT_ENABLED, py_func

CELL = """
import json, time
from slidemv import _accel, synthetic
from slidemv.market_data import compute_returns
from slidemv.strategy import StrategyParams, run_simulation
prices = synthetic.generate(synthetic.market_spec(assets={assets}, days={days}, seed=42))
returns = compute_returns(prices)
params = StrategyParams(50, 21, 2.0)
run_simulation(prices, returns, params)  # warm-up / compile
t0 = time.perf_counter()
for _ in range({repeat}):
    res = run_simulation(prices, returns, params)
dt = (time.perf_counter() - t0) / {repeat}
print(json.dumps({{"jit": _accel.JIT_ENABLED, "seconds": dt, "real_avg": res.real_avg}}))
"""


def best_of(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def kernel_rows(repeat):
    rng = np.random.default_rng(0)
    x = rng.normal(0, 0.02, size=(100, 16))
    w = np.full(100, 0.01)
    A = rng.normal(size=(16, 16))
    Q = A @ A.T * 1e-5 + 1e-6 * np.eye(16)
    R = rng.normal(5e-4, 1e-3, 16)
    R0 = float(np.quantile(R, 0.8))
    qp_args = (Q, R, R0, 1e-12, 1600, 1e-10, 1e-12)
    loop_py = py_func(kernels.window_moments_loop)
    qp_py = py_func(kernels.active_set_qp)
    kernels.window_moments_loop(x, w)
    kernels.active_set_qp(*qp_args)
    return [
        ("window moments 100x16", {
            "numba loop": best_of(lambda: kernels.window_moments_loop(x, w), repeat, 200),
            "numpy twin": best_of(lambda: kernels.window_moments_numpy(x, w), repeat, 200),
            "python loop": best_of(lambda: loop_py(x, w), repeat, 3),
        }),
        ("active-set QP d=16", {
            "numba": best_of(lambda: kernels.active_set_qp(*qp_args), repeat, 200),
            # py_func only un-jits the outer loop; the subproblem solves stay compiled
            "python outer": best_of(lambda: qp_py(*qp_args), repeat, 3),
        }),
    ]


def cell_timing(disable, args):
    env = dict(os.environ)
    env.pop("SLIDEMV_DISABLE_JIT", None)
    if disable:
        env["SLIDEMV_DISABLE_JIT"] = "1"
    code = CELL.format(assets=args.assets, days=args.days, repeat=args.cell_repeat)
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--days", type=int, default=600)
    ap.add_argument("--assets", type=int, default=8)
    ap.add_argument("--cell-repeat", type=int, default=2)
    args = ap.parse_args(argv)
    if not JIT_ENABLED:
        sys.exit("run without SLIDEMV_DISABLE_JIT to compare both paths")

    for name, timings in kernel_rows(args.repeat):
        base = min(timings.values())
        print(name)
        for label, secs in timings.items():
            print(f"  {label:<12} {secs * 1e6:12.1f} us   x{secs / base:8.1f}")

    fast, slow = cell_timing(False, args), cell_timing(True, args)
    print(f"backtest cell ({args.days} days x {args.assets} assets, p=50 q=21 k=2)")
    print(f"  numba        {fast['seconds'] * 1e3:12.1f} ms")
    print(f"  fallback     {slow['seconds'] * 1e3:12.1f} ms   x{slow['seconds'] / fast['seconds']:8.1f}")
    print(f"  |real_avg difference| = {abs(fast['real_avg'] - slow['real_avg']):.1e}")


if __name__ == "__main__":
    main()
