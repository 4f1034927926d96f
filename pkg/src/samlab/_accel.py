"""Optional numba acceleration.

Hot numeric kernels are compiled with ``numba.njit`` by default. Setting the
environment variable ``SAMLAB_NO_NUMBA=1`` (before import) selects the pure
numpy path instead; the fallback runs the very same function bodies, so both
paths produce identical results.
"""

import os

__all__ = ["NUMBA_ENABLED", "maybe_njit"]


def _numba_wanted() -> bool:
    flag = os.environ.get("SAMLAB_NO_NUMBA", "").strip().lower()
    return flag not in ("1", "true", "yes")


NUMBA_ENABLED = False
if _numba_wanted():
    try:
        import numba  # noqa: F401

        NUMBA_ENABLED = True
    except ImportError:
        NUMBA_ENABLED = False


def maybe_njit(func=None, **options):
    """``numba.njit`` when acceleration is enabled, identity otherwise."""
    if func is None:
        return lambda f: maybe_njit(f, **options)
    if NUMBA_ENABLED:
        import numba

        options.setdefault("cache", True)
        return numba.njit(**options)(func)
    return func
