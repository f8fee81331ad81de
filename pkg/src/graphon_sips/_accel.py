"""Numba switch.

Hot kernels are compiled with numba unless ``GRAPHON_SIPS_NUMBA=0`` is set in
the environment (or numba cannot be imported), in which case the vectorised
numpy implementations are used instead.
"""

import os

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    _HAVE_NUMBA = False


def _env_enabled():
    flag = os.environ.get("GRAPHON_SIPS_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "no", "off")


USE_NUMBA = _HAVE_NUMBA and _env_enabled()


def njit(*args, **kwargs):
    """``numba.njit`` when numba is available, otherwise a no-op decorator.

    The decorated function is always compiled when numba is importable so
    that the benchmark can compare both paths in one process; ``USE_NUMBA``
    only decides which path the library dispatches to.
    """
    if _HAVE_NUMBA:
        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


def have_numba():
    return _HAVE_NUMBA
