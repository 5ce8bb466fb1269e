"""Selects the compiled RK4 kernel when available, else the numpy fallback.

Set ``CQED_WSTATE_PURE=1`` to force the fallback.
"""
from __future__ import annotations

import os

from . import _kernel_py

if os.environ.get("CQED_WSTATE_PURE"):
    _compiled = None
else:
    try:
        from . import _kernel as _compiled
    except ImportError:
        _compiled = None

kernel = _compiled if _compiled is not None else _kernel_py
NAME = "cython" if _compiled is not None else "python"


def get_kernel(name: str | None = None):
    """Return a kernel module by name (``"cython"``, ``"python"``) or the active one."""
    if name is None:
        return kernel
    if name == "python":
        return _kernel_py
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernel is not built; run `pip install -e .`")
        return _compiled
    raise ValueError(f"unknown kernel {name!r}")
