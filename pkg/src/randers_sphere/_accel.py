"""Optional numba acceleration.

Set ``RANDERS_SPHERE_NUMBA=0`` to force the pure-numpy kernels even when
numba is importable.
"""
import os

_requested = os.environ.get("RANDERS_SPHERE_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")

try:
    if not _requested:
        raise ImportError("numba disabled by RANDERS_SPHERE_NUMBA")
    from numba import njit
    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        # bare @njit or @njit(...) both work
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrapper(func):
            return func

        return wrapper


USE_NUMBA = HAVE_NUMBA
