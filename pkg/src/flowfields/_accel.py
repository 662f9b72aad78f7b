"""Backend selection for the hot kernels.

``FLOWFIELDS_BACKEND=numpy`` forces the vectorised numpy kernels; the default
uses numba when it can be imported.
"""
import os

try:
    import numba
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

_requested = os.environ.get("FLOWFIELDS_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(f"FLOWFIELDS_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

BACKEND = "numba" if (_requested == "numba" and HAVE_NUMBA) else "numpy"

JIT_OPTIONS = dict(nogil=True, cache=True)


def njit(fn):
    if HAVE_NUMBA:
        return numba.njit(**JIT_OPTIONS)(fn)
    return fn
