"""Numba switch for the hot kernels.

Every hot kernel in :mod:`simplex_drift.kernels` exists twice: a loop version
compiled with numba and a vectorised numpy version. ``SIMPLEX_DRIFT_NUMBA=0``
(read at import time) routes the public names to the numpy versions.
"""
import os

try:
    import numba
    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False

_flag = os.environ.get("SIMPLEX_DRIFT_NUMBA", "1").strip().lower()
USE_NUMBA = HAS_NUMBA and _flag not in ("0", "false", "no", "off")


def jit(func):
    # Compilation is lazy, so defining loop kernels costs nothing when the
    # numpy path is selected; the benchmark still calls them directly.
    if not HAS_NUMBA:
        return func
    return numba.njit(cache=True, nogil=True, error_model="numpy")(func)


def backend():
    return "numba" if USE_NUMBA else "numpy"
