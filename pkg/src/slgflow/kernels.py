"""Kernel backend selection.

Prefers the compiled extension when it imported cleanly; the numpy fallback
is numerically identical.  Set SLGFLOW_KERNELS=python|compiled to force one
(the compiled choice raises if the extension is unavailable).
"""

import os

from . import _kernels_py

_choice = os.environ.get("SLGFLOW_KERNELS", "").strip().lower()
_impl = None
if _choice in ("", "compiled"):
    try:
        from . import _kernels_cy as _impl  # type: ignore[attr-defined]
    except ImportError:
        if _choice == "compiled":
            raise
        _impl = None
if _impl is None:
    _impl = _kernels_py

BACKEND = "compiled" if _impl is not _kernels_py else "python"

stencil_apply = _impl.stencil_apply
hessian_eigs = _impl.hessian_eigs
