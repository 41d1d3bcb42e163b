"""Kernel backend selection.

The compiled Cython kernels are preferred when importable; the NumPy
reference kernels are the fallback.  Set ``DUALDIMER_BACKEND=numpy`` or
``DUALDIMER_BACKEND=compiled`` before import to force a choice (forcing the
compiled backend raises if the extension is unavailable).
"""

import os

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

_requested = os.environ.get("DUALDIMER_BACKEND", "").strip().lower()
if _requested in ("numpy", "python"):
    _impl = _kernels_py
elif _requested in ("compiled", "cython"):
    if _compiled is None:
        raise ImportError(
            "DUALDIMER_BACKEND=compiled requested but the extension is not built; "
            "reinstall with a C compiler or unset the variable"
        )
    _impl = _compiled
elif _requested:
    raise ValueError(f"unknown DUALDIMER_BACKEND value {_requested!r}")
else:
    _impl = _compiled if _compiled is not None else _kernels_py

bundle_forward = _impl.bundle_forward
bundle_backprop = _impl.bundle_backprop


def active_backend() -> str:
    """Name of the kernel implementation in use ('compiled' or 'numpy')."""
    return "compiled" if _impl is _compiled else "numpy"


def available_backends() -> dict:
    """All importable kernel modules, keyed by name (for parity tests)."""
    out = {"numpy": _kernels_py}
    if _compiled is not None:
        out["compiled"] = _compiled
    return out
