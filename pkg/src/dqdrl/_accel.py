"""Numba switch for the hot kernels.

Every kernel in the package exists twice: a numba ``@njit`` version and a
pure-numpy version.  The numba path is used when numba imports cleanly and
``DQDRL_DISABLE_NUMBA`` is unset (or ``0``).  Set ``DQDRL_DISABLE_NUMBA=1``
to force the numpy path, e.g. when debugging or profiling.
"""
from __future__ import annotations

import os

_FLAG = "DQDRL_DISABLE_NUMBA"


def _numba_requested() -> bool:
    return os.environ.get(_FLAG, "0").strip().lower() in ("", "0", "false", "no")


try:
    import numba as _numba
    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and _numba_requested()


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise an identity decorator.

    The compiled function is only *selected* by callers when ``USE_NUMBA``
    is true; compiling is lazy, so decorating is free either way.
    """
    if not HAS_NUMBA:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    kwargs.setdefault("nogil", True)
    return _numba.njit(*args, **kwargs)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
