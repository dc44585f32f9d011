"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
fallback.  Set ``LOSSLAB_BACKEND=python`` to force the fallback (benchmarks
and cross-backend tests do this through :func:`get_kernels`).
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def get_kernels(name: str | None = None) -> ModuleType:
    """Return the kernel module for ``name`` ("compiled", "python" or None for auto)."""
    if name is None:
        name = os.environ.get("LOSSLAB_BACKEND", "auto")
    if name == "python":
        return _pykernels
    if name == "compiled":
        if _ckernels is None:
            raise ImportError("compiled kernels are not built; run `pip install -e .`")
        return _ckernels
    if name != "auto":
        raise ValueError(f"unknown backend {name!r}")
    return _ckernels if _ckernels is not None else _pykernels


kernels = get_kernels()
BACKEND = "compiled" if kernels is _ckernels else "python"
