"""Hot-kernel backend selection.

The compiled extension is preferred when importable; a NumPy fallback keeps
pure-Python installs working. ``PIPELINE_PILOT_BACKEND`` forces the choice:
``native``, ``python``, or ``auto`` (default).
"""

from __future__ import annotations

import os

from . import fallback

_requested = os.environ.get("PIPELINE_PILOT_BACKEND", "auto").lower()

if _requested not in ("auto", "native", "python"):
    raise ValueError(
        f"PIPELINE_PILOT_BACKEND must be auto, native, or python, got {_requested!r}"
    )

_impl = None
if _requested in ("auto", "native"):
    try:
        from . import _native as _impl
    except ImportError:
        if _requested == "native":
            raise ImportError(
                "PIPELINE_PILOT_BACKEND=native but the compiled kernels are "
                "not available; reinstall with a C compiler or unset the variable"
            ) from None
if _impl is None:
    _impl = fallback

BACKEND = _impl.BACKEND_NAME
accumulate_features = _impl.accumulate_features
nearest_index = _impl.nearest_index

__all__ = ["BACKEND", "accumulate_features", "nearest_index", "fallback"]
