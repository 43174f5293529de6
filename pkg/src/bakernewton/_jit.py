"""Numba switch for the hot kernels.

Set ``BAKERNEWTON_DISABLE_NUMBA=1`` to run every kernel as plain numpy
(useful for debugging and for the benchmark's reference path).
"""
import os

DISABLE_NUMBA = os.environ.get("BAKERNEWTON_DISABLE_NUMBA", "0").lower() in ("1", "true", "yes")

if DISABLE_NUMBA:
    HAS_NUMBA = False
else:
    try:
        import numba
        HAS_NUMBA = True
    except ImportError:  # pragma: no cover
        HAS_NUMBA = False


def jit(func):
    if HAS_NUMBA:
        return numba.njit(cache=True, nogil=True)(func)
    return func
