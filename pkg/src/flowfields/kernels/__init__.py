"""Hot kernels: numba loops or a pure-numpy fallback, chosen by ``FLOWFIELDS_BACKEND``."""
from types import ModuleType

from .._accel import BACKEND, HAVE_NUMBA
from . import jit, vectorized

CENSUS = jit.CENSUS
SIFT_L2 = jit.SIFT_L2


def get_backend(name: str | None = None) -> ModuleType:
    """Return the kernel module for ``name`` (``"numba"`` or ``"numpy"``)."""
    name = name or BACKEND
    if name == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba is not installed")
        return jit
    if name == "numpy":
        return vectorized
    raise ValueError(f"unknown backend {name!r}")


active = get_backend()
