"""Backend selection for the numeric kernels.

Set ``RIDGELAB_NUMBA=0`` to force the pure-numpy path even when numba is
installed. The flag is read once at import time.
"""
import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

_flag = os.environ.get("RIDGELAB_NUMBA", "1").strip().lower()
USE_NUMBA = HAVE_NUMBA and _flag not in ("0", "false", "no", "off")


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    if HAVE_NUMBA:
        return numba.njit(*args, **kwargs)

    def wrap(fn):
        return fn

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return wrap


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
