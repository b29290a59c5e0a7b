"""JIT switch for the hot kernels.

Set ``SLIDEMV_DISABLE_JIT=1`` to run every kernel as plain numpy/Python.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

_FALSY = {"1", "true", "yes", "on"}

JIT_ENABLED = numba is not None and os.environ.get("SLIDEMV_DISABLE_JIT", "").lower() not in _FALSY

# fastmath stays off: reassociation would break bit-reproducible backtests
NJIT_KWARGS = {"cache": True, "nogil": True, "fastmath": False}


def jit(func):
    if JIT_ENABLED:
        return numba.njit(**NJIT_KWARGS)(func)
    return func


def py_func(func):
    """Return the undecorated Python function behind a (possibly) jitted kernel."""
    return getattr(func, "py_func", func)
