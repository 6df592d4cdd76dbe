"""Hot-loop kernels with a compiled backend and a pure-Python fallback.

The compiled extension (``_fast``) is used when it imports; otherwise the
NumPy reference implementation is used.  Setting ``PROJLSTD_PURE_PYTHON=1``
forces the fallback.  ``BACKEND`` names the active choice.
"""

import os

from . import _reference

_force_python = os.environ.get("PROJLSTD_PURE_PYTHON", "").strip() not in ("", "0")

if _force_python:
    _impl = _reference
    BACKEND = "python"
else:
    try:
        from . import _fast as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = _reference
        BACKEND = "python"

sample_path = _impl.sample_path
lstd_accumulate = _impl.lstd_accumulate

__all__ = ["BACKEND", "sample_path", "lstd_accumulate"]
