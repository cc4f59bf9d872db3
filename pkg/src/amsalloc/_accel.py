"""Switch between numba-compiled kernels and the pure-numpy fallbacks.

Set ``AMSALLOC_DISABLE_NUMBA=1`` before import to force the numpy path.
"""
from __future__ import annotations

import os

_FLAG = "AMSALLOC_DISABLE_NUMBA"


def _disabled() -> bool:
    return os.environ.get(_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}


try:
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _njit = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _disabled()


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity decorator otherwise."""
    if _njit is None:  # pragma: no cover
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    return _njit(*args, **kwargs)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
