"""Optional numba acceleration.

Hot kernels are written in the numba-compatible subset of Python and wrapped
with :func:`njit`.  Setting ``HTSIM_DISABLE_NUMBA=1`` (or running without
numba installed) leaves them as plain Python/numpy functions.
"""

import os

_FLAG = os.environ.get("HTSIM_DISABLE_NUMBA", "").strip().lower()

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

NUMBA_ENABLED = _numba is not None and _FLAG not in ("1", "true", "yes", "on")


def njit(fn=None, **kwargs):
    """``numba.njit(cache=True)`` when enabled, identity otherwise."""

    def wrap(f):
        if not NUMBA_ENABLED:
            return f
        return _numba.njit(cache=True, **kwargs)(f)

    if fn is None:
        return wrap
    return wrap(fn)
