"""Backend selection for the inner loops.

The compiled extension is used when it imports; set ``FROUND_PURE_PYTHON=1``
to force the pure-Python implementation.
"""

import os

from . import _pykernels

if os.environ.get("FROUND_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"
    else:
        BACKEND = "cython"

window_stats = _impl.window_stats
deliver_row = _impl.deliver_row
car_follow = _impl.car_follow

__all__ = ["BACKEND", "window_stats", "deliver_row", "car_follow"]
