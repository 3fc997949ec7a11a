"""Backend switch for the hot kernels.

Set ``NCVAIC_DISABLE_NUMBA=1`` to run the pure-numpy fallbacks; the flag is read
once at import time. With numba disabled (or missing) ``njit`` is the identity,
so scalar helpers run as plain Python and loop kernels switch to their
vectorised numpy twins.
"""
import os

_DISABLED = os.environ.get("NCVAIC_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    from numba import njit as _numba_njit
    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    _numba_njit = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and not _DISABLED
BACKEND = "numba" if USE_NUMBA else "numpy"


def njit(func):
    if not USE_NUMBA:
        return func
    return _numba_njit(cache=True, nogil=True)(func)
