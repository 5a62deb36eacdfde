"""Kernel backend selection.

The compiled extension is preferred when importable; the numpy fallback
is always available.  ``SQZLAB_KERNELS`` forces a choice:

  auto      compiled if built, else python (default)
  compiled  require the extension, raise if missing
  python    force the numpy fallback
"""

import os

_choice = os.environ.get("SQZLAB_KERNELS", "auto").lower()

if _choice not in ("auto", "compiled", "python"):
    raise ValueError(f"SQZLAB_KERNELS must be auto|compiled|python, got {_choice!r}")

if _choice == "python":
    from . import _purepy as _backend
else:
    try:
        from . import _core as _backend  # type: ignore[no-redef]
    except ImportError:
        if _choice == "compiled":
            raise
        from . import _purepy as _backend  # type: ignore[no-redef]

detected_variance = _backend.detected_variance
model_db = _backend.model_db
model_db_jacobian = _backend.model_db_jacobian


def backend_name() -> str:
    """'compiled' or 'python', whichever is active."""
    return _backend.BACKEND
