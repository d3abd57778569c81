"""Numba dispatch for the numeric kernels.

Every kernel in :mod:`switchspin._kernels` is written in the subset of
Python/NumPy that numba understands.  By default each one is compiled with
``numba.njit``; setting ``SWITCHSPIN_NO_JIT=1`` (or running without numba
installed) leaves them as plain interpreted functions.  The flag is read once
at import time.
"""

import os

try:  # pragma: no cover - exercised implicitly
    import numba
except ImportError:  # pragma: no cover
    numba = None

_FLAG = os.environ.get("SWITCHSPIN_NO_JIT", "").strip().lower()
JIT_ENABLED = numba is not None and _FLAG not in {"1", "true", "yes", "on"}

# uncompiled originals, keyed by function name
PY_KERNELS = {}


def kernel(fn):
    """Register ``fn`` and return its compiled form when JIT is enabled."""
    PY_KERNELS[fn.__name__] = fn
    if JIT_ENABLED:
        return numba.njit(cache=True, nogil=True)(fn)
    return fn
