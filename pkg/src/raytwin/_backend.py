"""Kernel backend selection.

Hot loops are compiled with numba when it is importable. Setting
``RAYTWIN_NO_NUMBA=1`` forces the vectorised numpy path instead; the flag is
read once, at import time.
"""

import os
import warnings

_DISABLED = os.environ.get("RAYTWIN_NO_NUMBA", "0").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError
    import numba as _numba
    # numba probes TBB on the first parallel launch and warns about old versions
    warnings.filterwarnings("ignore", message=".*TBB threading layer.*")
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:
    _numba = None
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(fn):
            return fn

        return wrap

    prange = range

USE_NUMBA = HAVE_NUMBA


def backend_name():
    return "numba" if USE_NUMBA else "numpy"


def max_threads():
    if USE_NUMBA:
        return int(_numba.config.NUMBA_NUM_THREADS)
    return os.cpu_count() or 1


def resolve_threads(threads):
    """Map ``None``/``"auto"``/int to a concrete worker count within limits."""
    if threads in (None, "auto"):
        return max_threads()
    n = int(threads)
    if n < 1:
        raise ValueError(f"thread count must be >= 1, got {n}")
    return min(n, max_threads()) if USE_NUMBA else n


class thread_limit:
    """Context manager pinning the numba worker count for a block."""

    def __init__(self, threads):
        self.threads = resolve_threads(threads)
        self._saved = None

    def __enter__(self):
        if USE_NUMBA:
            self._saved = _numba.get_num_threads()
            _numba.set_num_threads(self.threads)
        return self.threads

    def __exit__(self, *exc):
        if USE_NUMBA and self._saved is not None:
            _numba.set_num_threads(self._saved)
        return False
