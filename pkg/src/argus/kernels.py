"""Backend selection for the hot-path kernels.

Prefers the compiled extension; falls back to the pure-Python mirror when
the extension is missing or ``ARGUS_PURE_PYTHON`` is set to a non-empty
value other than ``0``.  Both backends are drop-in identical (asserted by
the parity tests).
"""

from __future__ import annotations

import os

from . import _kernels_py as _py

if os.environ.get("ARGUS_PURE_PYTHON", "").strip() not in ("", "0"):
    _impl = _py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        _impl = _py
        BACKEND = "python"

box_intersects = _impl.box_intersects
first_hit_offsets = _impl.first_hit_offsets
overlap_mask = _impl.overlap_mask
kbm_rollout = _impl.kbm_rollout

# Column layout shared by every box-sequence array fed to the kernels.
COL_X, COL_Y, COL_THETA, COL_V, COL_HL, COL_HW = range(6)
