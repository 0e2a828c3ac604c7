"""Kernel backend selection.

The compiled extension is used when it imports; otherwise (or when
``DIVRANGE_PURE=1``) the pure-Python reference implementations are used.
"""
import os

from . import _kernels_py

if os.environ.get("DIVRANGE_PURE", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py
        BACKEND = "python"

monotone_chain = _impl.monotone_chain
halfplane_margin = _impl.halfplane_margin

__all__ = ["BACKEND", "monotone_chain", "halfplane_margin"]
