"""Kernel backend selection.

The hot kernels exist twice: a compiled Cython extension (``dmdsolve._core``)
and a pure-Python fallback (``dmdsolve._kernels_py``).  The compiled backend
is preferred when importable; ``DMDSOLVE_BACKEND=python|compiled|auto``
overrides the default, and :func:`use_backend` switches temporarily (used by
the cross-backend tests and the backend benchmark).
"""

from __future__ import annotations

import os
from contextlib import contextmanager

from . import _kernels_py

try:
    from . import _core
except ImportError:
    _core = None

COMPILED_AVAILABLE = _core is not None

# stack-buffer limits of the compiled kernels
_MAX_DEGREE = 7
_MAX_DIMS = 8
_MAX_ACTIVE = 4096


def _resolve(name: str):
    name = name.strip().lower()
    if name in ("auto", ""):
        return _core if COMPILED_AVAILABLE else _kernels_py
    if name in ("compiled", "cython"):
        if not COMPILED_AVAILABLE:
            raise RuntimeError(
                "compiled backend requested but dmdsolve._core is not built"
            )
        return _core
    if name == "python":
        return _kernels_py
    raise ValueError(f"unknown backend {name!r}")


_active_module = _resolve(os.environ.get("DMDSOLVE_BACKEND", "auto"))


def active_backend() -> str:
    """Name of the backend currently answering kernel calls."""
    return _active_module.BACKEND_NAME


def set_backend(name: str) -> None:
    global _active_module
    _active_module = _resolve(name)


@contextmanager
def use_backend(name: str):
    """Temporarily switch kernel backends."""
    global _active_module
    previous = _active_module
    _active_module = _resolve(name)
    try:
        yield
    finally:
        _active_module = previous


def kernels_for(basis) -> object:
    """Kernel module to use for this basis.

    Bases beyond the compiled kernels' stack limits route to the Python
    fallback regardless of the active backend.
    """
    if _active_module is _core and (
        basis.degree > _MAX_DEGREE
        or basis.n_dims > _MAX_DIMS
        or basis.n_active > _MAX_ACTIVE
    ):
        return _kernels_py
    return _active_module


def basis_kernel_args(basis) -> tuple:
    """The (ext_knots, degree, n_per_dim, n_lag) tuple kernels expect."""
    import numpy as np

    return (
        np.ascontiguousarray(basis.ext_knots, dtype=np.float64),
        int(basis.degree),
        int(basis.n_per_dim),
        int(basis.n_lag),
    )
