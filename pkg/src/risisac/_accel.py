"""Numba switch.

Hot kernels are compiled with numba unless ``RISISAC_NUMBA=0`` is set in the
environment (or numba is missing), in which case the pure-numpy path is used.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

USE_NUMBA = numba is not None and os.environ.get("RISISAC_NUMBA", "1") != "0"


def njit(func):
    """``numba.njit(cache=True)`` when available, otherwise identity."""
    if numba is None:  # pragma: no cover
        return func
    return numba.njit(cache=True)(func)
