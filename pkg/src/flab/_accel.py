"""Backend selection for the hot kernels.

Every kernel in :mod:`flab.dd` and :mod:`flab.kernels` has a numba path
(element loops compiled with ``@njit``) and a pure-numpy path (the same
arithmetic applied to whole arrays).  The numpy path is used when numba is
missing or when the environment variable ``FLAB_NUMBA`` is set to ``0``.
The flag is read once, at import time.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_OFF = {"0", "false", "no", "off"}

USE_NUMBA = numba is not None and os.environ.get("FLAB_NUMBA", "1").strip().lower() not in _OFF
BACKEND = "numba" if USE_NUMBA else "numpy"


def jit(fn):
    """``numba.njit(cache=True, nogil=True)`` or the identity, per backend."""
    if USE_NUMBA:
        return numba.njit(cache=True, nogil=True)(fn)
    return fn
