"""Kernel selection: compiled extension when built, numpy fallback otherwise.

Set ``PARCELCON_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

if os.environ.get("PARCELCON_PURE_PYTHON"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_py

COMPILED: bool = _impl.COMPILED
pivot = _impl.pivot
entering_dantzig = _impl.entering_dantzig
entering_bland = _impl.entering_bland
leaving_row = _impl.leaving_row
assignment_feasible = _impl.assignment_feasible
exhaustive_search = _impl.exhaustive_search

__all__ = [
    "COMPILED",
    "pivot",
    "entering_dantzig",
    "entering_bland",
    "leaving_row",
    "assignment_feasible",
    "exhaustive_search",
]
