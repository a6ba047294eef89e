"""Numba acceleration switch.

Hot kernels in :mod:`ecofair.kernels` are compiled with ``numba.njit`` when
available.  Setting the environment variable ``ECOFAIR_DISABLE_NUMBA`` to a
truthy value (``1``, ``true``, ``yes``) forces the pure-numpy fallback path,
which computes the same quantities with vectorised numpy primitives.  The
flag is read once at import time.
"""

import os

_FLAG = os.environ.get("ECOFAIR_DISABLE_NUMBA", "").strip().lower()
NUMBA_DISABLED = _FLAG in {"1", "true", "yes", "on"}

if NUMBA_DISABLED:
    HAS_NUMBA = False
else:
    try:
        import numba  # noqa: F401

        HAS_NUMBA = True
    except ImportError:
        HAS_NUMBA = False


def backend() -> str:
    """Name of the active kernel backend, for benchmarks and run metadata."""
    return "numba" if HAS_NUMBA else "numpy"
