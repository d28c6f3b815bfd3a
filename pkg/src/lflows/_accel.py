"""Backend selection for the hot kernels.

Set ``LFLOWS_DISABLE_NUMBA=1`` to force the vectorized numpy path even
when numba is importable.
"""
import os

_DISABLED = os.environ.get("LFLOWS_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError("disabled by LFLOWS_DISABLE_NUMBA")
    from numba import njit as _njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False
    _njit = None


def njit(*args, **kwargs):
    """``numba.njit`` with caching, or a no-op decorator without numba."""
    if _njit is None:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return _njit(*args, **kwargs)


def backend() -> str:
    return "numba" if HAS_NUMBA else "numpy"
