"""Kernel backend selection.

Hot loops are compiled with numba when it is importable.  Setting the
environment variable ``ASL_BACKEND=numpy`` forces the pure-numpy fallback,
which is also used automatically when numba is missing.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

HAS_NUMBA = numba is not None
USE_NUMBA = HAS_NUMBA and os.environ.get("ASL_BACKEND", "numba").lower() != "numpy"


def njit(func):
    """Compile ``func`` with numba when available, else return it unchanged."""
    if not HAS_NUMBA:
        return func
    return numba.njit(cache=True)(func)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
