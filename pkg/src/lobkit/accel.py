"""Numba acceleration shim.

Hot kernels are written as plain numpy/loop functions and compiled with
``numba.njit`` when available.  Setting the environment variable
``LOBKIT_DISABLE_NUMBA=1`` (or numba being missing) selects the pure-numpy
fallback path instead.  The flag is read once at import time.
"""

import os

_FALSY = ("", "0", "false", "no")


def _numba_wanted() -> bool:
    if os.environ.get("LOBKIT_DISABLE_NUMBA", "").strip().lower() not in _FALSY:
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


NUMBA_ENABLED = _numba_wanted()

if NUMBA_ENABLED:
    from numba import njit
else:
    def njit(*args, **kwargs):
        """No-op replacement for numba.njit."""
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap
