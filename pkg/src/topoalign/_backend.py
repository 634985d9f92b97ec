"""Pick the compiled event loop when available.

Set ``TOPOALIGN_PURE_PYTHON=1`` to force the numpy fallback.
"""
import os

from . import _fallback

if os.environ.get("TOPOALIGN_PURE_PYTHON", "") not in ("", "0"):
    _impl = _fallback
else:
    try:
        from . import _core as _impl
    except ImportError:  # extension not built
        _impl = _fallback

BACKEND = _impl.BACKEND
simulate_segment = _impl.simulate_segment
