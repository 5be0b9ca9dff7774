"""Backend selection for the spline kernels.

The compiled extension is used when it imports; otherwise the NumPy
implementation is used. Set ``LEVY_EXTRACT_PURE=1`` to force the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"

if os.environ.get("LEVY_EXTRACT_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
else:
    _impl = _kernels_py

rqs_forward = _impl.rqs_forward
rqs_inverse = _impl.rqs_inverse
rqs_backward = _impl.rqs_backward


def get_backend(name):
    """Return the kernel module for ``name`` ("python" or "cython")."""
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown backend {name!r}")


def available_backends():
    names = ["python"]
    try:
        from . import _kernels  # noqa: F401
        names.append("cython")
    except ImportError:
        pass
    return names


def use_backend(name):
    """Rebind the module-level kernels to ``name``; returns the previous backend."""
    global rqs_forward, rqs_inverse, rqs_backward, BACKEND
    impl = get_backend(name)
    previous = BACKEND
    rqs_forward, rqs_inverse, rqs_backward = impl.rqs_forward, impl.rqs_inverse, impl.rqs_backward
    BACKEND = name
    return previous
