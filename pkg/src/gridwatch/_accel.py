"""Backend selection for the compiled kernels.

Set ``GRIDWATCH_NO_NUMBA=1`` to force the pure-numpy code paths, e.g. when
debugging or on platforms without a working numba install.
"""

import os

_FLAG = os.environ.get("GRIDWATCH_NO_NUMBA", "").strip().lower()

try:  # pragma: no cover - exercised implicitly
    import numba as _numba
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _FLAG not in ("1", "true", "yes", "on")


def njit(*args, **kwargs):
    """``numba.njit`` when numba is installed, identity otherwise.

    The compiled variant is always built when numba is present (so the
    benchmark can compare both backends); ``USE_NUMBA`` only controls which
    one the public dispatchers pick.
    """
    kwargs.setdefault("cache", True)
    kwargs.setdefault("nogil", True)
    if HAVE_NUMBA:
        return _numba.njit(*args, **kwargs)
    if args and callable(args[0]):
        return args[0]
    return lambda fn: fn


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
