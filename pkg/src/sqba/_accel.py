"""Numba availability switch.

Set ``SQBA_DISABLE_NUMBA=1`` before import to force the pure-numpy kernels.
"""
import os

_disabled = os.environ.get("SQBA_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _disabled:
        raise ImportError("numba disabled by SQBA_DISABLE_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        # bare decorator use: @njit
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(func):
            return func

        return wrap


def backend():
    return "numba" if HAVE_NUMBA else "numpy"
