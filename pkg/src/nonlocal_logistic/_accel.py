"""Optional numba acceleration.

Set ``NLD_DISABLE_NUMBA=1`` to force the pure-numpy code paths.  The flag is
read once at import time; :func:`set_numba_enabled` flips it afterwards (used
by the benchmark and the backend-equivalence tests).
"""

from __future__ import annotations

import os

_TRUTHY = {"1", "true", "yes", "on"}

try:
    import numba

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    NUMBA_AVAILABLE = False

_DISABLED_ENV = os.environ.get("NLD_DISABLE_NUMBA", "").strip().lower() in _TRUTHY
_use_numba = NUMBA_AVAILABLE and not _DISABLED_ENV


def numba_enabled() -> bool:
    return _use_numba


def set_numba_enabled(flag: bool) -> bool:
    """Toggle the numba path at runtime. Returns the previous setting."""
    global _use_numba
    previous = _use_numba
    _use_numba = bool(flag) and NUMBA_AVAILABLE
    return previous


def njit(*args, **kwargs):
    """``numba.njit`` when numba imports, otherwise a no-op decorator.

    Decorated functions are only called when :func:`numba_enabled` is true,
    so the fallback never runs interpreted loops on a hot path.
    """
    bare = len(args) == 1 and callable(args[0]) and not kwargs
    kwargs.setdefault("cache", True)
    if NUMBA_AVAILABLE:
        if bare:
            return numba.njit(**kwargs)(args[0])
        return numba.njit(*args, **kwargs)
    if bare:
        return args[0]

    def wrap(fn):
        return fn

    return wrap
