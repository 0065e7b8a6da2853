"""Kernel backend selection: compiled extension when importable, numpy otherwise.

Set ``BLOWUP_LAB_PURE=1`` to force the numpy fallback.
"""
from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("BLOWUP_LAB_PURE", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        _impl = _kernels_py
        BACKEND = "python"

advance = _impl.advance
advance_py = _kernels_py.advance


def compiled_advance():
    """The compiled kernel, or ``None`` when the extension is not built."""
    try:
        from . import _kernels
    except ImportError:  # pragma: no cover
        return None
    return _kernels.advance
