"""Hot simulation loops with backend selection at import time.

The compiled Cython module is preferred; the pure-numpy module is the
drop-in fallback. ``OFU_LQG_BACKEND=python`` forces the fallback, which is
mainly useful for the backend-comparison benchmark and tests.
"""

import os

from . import _pure

if os.environ.get("OFU_LQG_BACKEND", "").lower() == "python":
    _impl = _pure
    BACKEND = "python"
else:
    try:
        from . import _core as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _pure
        BACKEND = "python"

open_loop_rollout = _impl.open_loop_rollout
closed_loop_rollout = _impl.closed_loop_rollout


def backend() -> str:
    """Name of the active kernel backend ('cython' or 'python')."""
    return BACKEND
