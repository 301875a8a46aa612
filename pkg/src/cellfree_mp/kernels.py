"""Backend selection for the hot kernels.

The compiled extension ``_core`` is used when it imports; otherwise the numpy
fallback in ``_pykernels``.  Set ``CELLFREE_MP_BACKEND=python`` to force the
fallback.
"""

import os

from . import _pykernels

STATUS_TOL = _pykernels.STATUS_TOL
STATUS_MAXITER = _pykernels.STATUS_MAXITER
STATUS_UNDERFLOW = _pykernels.STATUS_UNDERFLOW
STATUS_NONFINITE = _pykernels.STATUS_NONFINITE

_compiled = None
if os.environ.get("CELLFREE_MP_BACKEND", "").lower() != "python":
    try:
        from . import _core as _compiled
    except ImportError:  # extension not built
        _compiled = None

backend = _compiled if _compiled is not None else _pykernels
BACKEND = "cython" if _compiled is not None else "python"


def get_backend(name=None):
    """Return the kernel module for ``name`` (``"cython"``, ``"python"`` or None)."""
    if name is None:
        return backend
    if name == "python":
        return _pykernels
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled backend unavailable; build with `pip install -e .`")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def available_backends():
    return ["python"] + (["cython"] if _compiled is not None else [])


f_values = backend.f_values
f_and_grad = backend.f_and_grad
project_simplex = backend.project_simplex
mp_loop = backend.mp_loop
