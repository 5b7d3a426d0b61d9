"""Numeric backend selection.

The compiled extension is used when it imported successfully; otherwise the
numpy fallback takes over transparently. `GEOKGE_BACKEND=python` forces the
fallback, `GEOKGE_BACKEND=compiled` demands the extension (import error if
it is unavailable).
"""

from __future__ import annotations

import os

from . import _kernels_np

_requested = os.environ.get("GEOKGE_BACKEND", "").strip().lower()

if _requested == "python":
    _impl = _kernels_np
elif _requested == "compiled":
    from . import _ckernels as _impl
elif _requested in ("", "auto"):
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _kernels_np
else:
    raise RuntimeError(
        f"GEOKGE_BACKEND={_requested!r} not recognized (use 'python', 'compiled', or 'auto')"
    )

BACKEND = "python" if _impl is _kernels_np else "compiled"

triplet_scores = _impl.triplet_scores
triplet_grad_accum = _impl.triplet_grad_accum
align_scores = _impl.align_scores
align_grad_accum = _impl.align_grad_accum
adam_update_rows = _impl.adam_update_rows
jenks_cost_table = _impl.jenks_cost_table
