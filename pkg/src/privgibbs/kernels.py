"""Select the record-sweep kernel backend.

The compiled extension is used when importable. Set
``PRIVGIBBS_BACKEND=python`` to force the pure-Python fallback.
"""
import os

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    BACKENDS["cython"] = _compiled

_requested = os.environ.get("PRIVGIBBS_BACKEND", "").strip().lower()
if _requested and _requested not in BACKENDS:
    raise ImportError(f"PRIVGIBBS_BACKEND={_requested!r} is not available; "
                      f"have {sorted(BACKENDS)}")
BACKEND = _requested or ("cython" if _compiled is not None else "python")


def get(name=None):
    """Kernel module for ``name`` (default: the active backend)."""
    return BACKENDS[name or BACKEND]
