"""Hot kernels with a compiled backend and a pure-Python fallback.

The compiled module is used when it imports; set ``DCSIM_PURE_PYTHON=1`` to
force the fallback.
"""
from __future__ import annotations

import os

from . import _pykernels as python_backend

IN_FLIGHT = python_backend.IN_FLIGHT
DELIVERED = python_backend.DELIVERED
DROP_OVERFLOW = python_backend.DROP_OVERFLOW
DROP_RETX = python_backend.DROP_RETX

compiled_backend = None
if not os.environ.get("DCSIM_PURE_PYTHON"):
    try:
        from . import _ckernels as compiled_backend  # type: ignore[no-redef]
    except ImportError:
        compiled_backend = None

_active = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "compiled" if compiled_backend is not None else "python"

ar1_filter = _active.ar1_filter
window_stats = _active.window_stats
rlc_admit = _active.rlc_admit
rlc_serve = _active.rlc_serve
