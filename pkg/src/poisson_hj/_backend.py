"""Kernel backend selection.

The compiled ``_kernels`` extension is used when it imports; otherwise the
numpy implementation in ``_kernels_py`` takes over.  Setting
``POISSON_HJ_BACKEND=python`` forces the fallback.
"""
import contextlib
import os

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    BACKENDS["cython"] = _compiled


def _initial():
    requested = os.environ.get("POISSON_HJ_BACKEND", "").strip().lower()
    if requested:
        if requested not in BACKENDS:
            raise ImportError(f"POISSON_HJ_BACKEND={requested!r} is not available (have {sorted(BACKENDS)})")
        return BACKENDS[requested]
    return _compiled if _compiled is not None else _kernels_py


kernels = _initial()


def backend_name() -> str:
    return kernels.NAME


def set_backend(name: str) -> None:
    global kernels
    try:
        kernels = BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown or unavailable backend {name!r}; have {sorted(BACKENDS)}") from None


@contextlib.contextmanager
def use_backend(name: str):
    previous = kernels.NAME
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)
