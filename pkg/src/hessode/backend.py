"""Compiled-kernel backend selection.

The hot loops (system rate functions, costate compositions, and the
Runge-Kutta stepper) have a Cython implementation in ``hessode._core``.
If that extension is importable it is used automatically for systems that
carry a compiled kernel; otherwise everything runs on the pure-NumPy
code paths, which implement identical arithmetic.

Set ``HESSODE_BACKEND=python`` in the environment to force the fallback
(useful for cross-checking the two implementations), or call
:func:`set_backend` at runtime.
"""

from __future__ import annotations

import os

_core_module = None
_forced = os.environ.get("HESSODE_BACKEND", "auto").lower()

try:
    from . import _core as _core_module  # type: ignore
except ImportError:
    _core_module = None

_active = "python"
if _core_module is not None and _forced != "python":
    _active = "compiled"


def have_compiled() -> bool:
    return _core_module is not None


def compiled_active() -> bool:
    return _active == "compiled"


def active_backend() -> str:
    return _active


def core():
    return _core_module


def set_backend(name: str) -> str:
    """Switch between 'compiled', 'python', and 'auto'. Returns the result."""
    global _active
    name = name.lower()
    if name not in ("compiled", "python", "auto"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "auto":
        _active = "compiled" if _core_module is not None else "python"
    elif name == "compiled":
        if _core_module is None:
            raise RuntimeError("compiled backend requested but hessode._core "
                               "is not importable")
        _active = "compiled"
    else:
        _active = "python"
    return _active
