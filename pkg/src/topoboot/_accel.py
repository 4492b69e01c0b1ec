"""Switch between numba-compiled kernels and their plain-Python fallback.

Set ``TOPOBOOT_DISABLE_NUMBA=1`` before import to run every kernel as
ordinary Python/numpy. Results are identical either way; only speed differs.
"""
import os

DISABLE_NUMBA = os.environ.get("TOPOBOOT_DISABLE_NUMBA", "0").lower() in ("1", "true", "yes")

if not DISABLE_NUMBA:
    try:
        from numba import njit as _njit
        from numba import types
        from numba.typed import Dict
    except ImportError:  # pragma: no cover
        DISABLE_NUMBA = True

if DISABLE_NUMBA:
    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f

    def new_int_dict():
        return {}
else:
    def njit(*args, **kwargs):
        kwargs.setdefault("cache", True)
        kwargs.setdefault("nogil", True)
        if len(args) == 1 and callable(args[0]):
            return _njit(**kwargs)(args[0])
        return _njit(*args, **kwargs)

    @_njit(cache=True)
    def new_int_dict():
        return Dict.empty(key_type=types.int64, value_type=types.int64)

BACKEND = "python" if DISABLE_NUMBA else "numba"
