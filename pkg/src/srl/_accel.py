"""Optional numba acceleration.

Set ``SRL_DISABLE_NUMBA=1`` to force the pure-numpy code paths.  When numba
is missing the fallback is used silently.
"""

import os

_DISABLED = os.environ.get("SRL_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError
    import numba

    # tbb is often present but too old; skip it rather than warn
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via the env flag
    numba = None
    HAVE_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise the identity decorator."""
    if HAVE_NUMBA:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


prange = numba.prange if HAVE_NUMBA else range


def thread_cap():
    """Upper bound on worker threads, from ``SRL_THREADS`` (default: cpu count)."""
    raw = os.environ.get("SRL_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


def set_threads():
    """Apply :func:`thread_cap` to numba's pool and return the thread count used."""
    if not HAVE_NUMBA:
        return 1
    n = max(1, min(thread_cap(), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n
