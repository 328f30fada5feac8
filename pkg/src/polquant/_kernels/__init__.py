"""Kernel selection: compiled extension if importable, numpy fallback otherwise.

Set ``POLQUANT_PURE=1`` to force the fallback.
"""

import os

from . import _star_py

BACKEND = "python"
star_rows = _star_py.star_rows

if os.environ.get("POLQUANT_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _star_ext  # type: ignore[attr-defined]
    except ImportError:  # pragma: no cover - depends on build
        pass
    else:
        star_rows = _star_ext.star_rows
        BACKEND = "cython"

__all__ = ["star_rows", "BACKEND"]
