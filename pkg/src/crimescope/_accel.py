"""Numba switch.

Set ``CRIMESCOPE_DISABLE_NUMBA=1`` to force the pure-numpy kernels. The
choice is made once, at import time.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_flag = os.environ.get("CRIMESCOPE_DISABLE_NUMBA", "").strip().lower()
NUMBA_AVAILABLE = numba is not None
NUMBA_ENABLED = NUMBA_AVAILABLE and _flag in ("", "0", "false", "no")


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity decorator otherwise."""
    if numba is None:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)
