"""Numeric kernel backends.

The hot inner loops exist twice: a compiled Cython extension (``_core``,
OpenMP-threaded) and a pure-NumPy fallback (``_ref``). The compiled core is
selected at import when available; set ``FLIPSIM_BACKEND=python`` to force
the fallback, or call :func:`set_backend` at runtime. Both backends are
individually deterministic (including across worker counts); they agree
with each other to floating-point reassociation tolerance, not bit-exactly.
"""

from __future__ import annotations

import os

from . import _ref

try:
    from . import _core
except ImportError:  # extension not built; fall back to NumPy
    _core = None

_BACKENDS = {"python": _ref}
if _core is not None:
    _BACKENDS["cython"] = _core

_env = os.environ.get("FLIPSIM_BACKEND", "").strip().lower()
if _env in _BACKENDS:
    _active_name = _env
else:
    _active_name = "cython" if _core is not None else "python"

_workers = 1


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def backend_name() -> str:
    return _active_name


def active():
    """The currently selected backend module."""
    return _BACKENDS[_active_name]


def get_backend(name: str):
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(
            f"unknown backend {name!r}; available: {available_backends()}"
        ) from None


def set_backend(name: str) -> None:
    global _active_name
    get_backend(name)
    _active_name = name


def set_workers(n: int) -> None:
    """Thread count for the compiled kernels; 0 means auto-detect."""
    global _workers
    if n < 0:
        raise ValueError("worker count must be >= 0")
    _workers = n if n > 0 else (os.cpu_count() or 1)


def workers() -> int:
    return _workers
