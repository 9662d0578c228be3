"""Optional numba acceleration.

Set ``ENTSIM_DISABLE_NUMBA=1`` to run every kernel through its pure-numpy
implementation instead (useful for debugging and for the benchmark).
"""
import os

_FLAG = os.environ.get("ENTSIM_DISABLE_NUMBA", "").strip().lower()

try:
    import numba
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

NUMBA_ENABLED = HAVE_NUMBA and _FLAG not in ("1", "true", "yes", "on")


def njit(*args, **kwargs):
    """numba.njit when available, otherwise a passthrough decorator."""
    if HAVE_NUMBA:
        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


def resolve_backend(backend=None):
    """Return ``"numba"`` or ``"numpy"`` for an explicit or default request."""
    if backend is None:
        return "numba" if NUMBA_ENABLED else "numpy"
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not installed")
    return backend
