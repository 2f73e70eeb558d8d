"""Transition-kernel backend selection.

The compiled kernel is preferred when its extension module imported
successfully; NETPEN_PURE_PYTHON=1 forces the pure-Python reference kernel.
Both expose the same ``Engine`` class and outcome codes.
"""

from __future__ import annotations

import os

from . import _engine_py

_COMPILED = None
if not os.environ.get("NETPEN_PURE_PYTHON"):
    try:
        from . import _engine_cy as _COMPILED  # type: ignore[no-redef]
    except ImportError:
        _COMPILED = None

DEFAULT = _COMPILED if _COMPILED is not None else _engine_py


def available_backends() -> list[str]:
    names = ["python"]
    if _COMPILED is not None:
        names.append("compiled")
    return names


def get_backend(name: str = "auto"):
    """Return the kernel module for ``name`` ("auto", "python", "compiled")."""
    if name == "auto":
        return DEFAULT
    if name == "python":
        return _engine_py
    if name == "compiled":
        if _COMPILED is None:
            raise RuntimeError("compiled kernel is not available in this install")
        return _COMPILED
    raise ValueError(f"unknown engine backend: {name!r}")
