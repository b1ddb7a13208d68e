"""Selects the jet kernel implementation at import time.

Preference order: compiled Cython extension, then the pure-NumPy fallback.
Set ``HEISGEOM_PURE_PYTHON=1`` to force the fallback (used by the kernel
benchmark and by tests that compare the two implementations).
"""

import os

if os.environ.get("HEISGEOM_PURE_PYTHON"):
    from . import _jetcore_py as _impl
else:
    try:
        from . import _jetcore_cy as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _jetcore_py as _impl

IMPL_NAME = _impl.IMPL_NAME
mul = _impl.mul
