"""Pick the kernel implementation at import time.

The compiled extension is used when it was built; otherwise the NumPy
fallback is loaded. Set ``MCRC_BACKEND=python`` to force the fallback.
"""

import logging
import os

from . import _pykernels

log = logging.getLogger(__name__)

_requested = os.environ.get("MCRC_BACKEND", "auto").lower()

kernels = _pykernels
name = "python"

if _requested not in ("python", "py"):
    try:
        from . import _ckernels
    except ImportError:
        if _requested in ("cython", "c", "compiled"):
            raise
        log.debug("compiled kernels unavailable, using NumPy fallback")
    else:
        kernels = _ckernels
        name = "cython"


def available():
    """Names of the kernel backends importable in this environment."""
    out = ["python"]
    try:
        from . import _ckernels  # noqa: F401
    except ImportError:
        return out
    return out + ["cython"]


def get(backend=None):
    """Return a kernel module by name (``None`` means the active one)."""
    if backend is None:
        return kernels
    if backend == "python":
        return _pykernels
    if backend == "cython":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown backend {backend!r}")
