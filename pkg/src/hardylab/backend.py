"""Kernel backend selection.

The compiled Cython kernels are preferred when the extension built; the
numpy reference implementation is the fallback.  Set HARDYLAB_BACKEND to
"numpy" (or "python") to force the fallback, or "cython" to require the
extension.
"""

from __future__ import annotations

import os

from . import _kernels_np

_FORCED = os.environ.get("HARDYLAB_BACKEND", "").strip().lower()

if _FORCED in ("numpy", "python", "py"):
    kernels = _kernels_np
elif _FORCED in ("cython", "c", "compiled"):
    from . import _kernels_c as kernels  # noqa: F401
else:
    try:
        from . import _kernels_c as kernels  # type: ignore[no-redef]
    except ImportError:
        kernels = _kernels_np

BACKEND = getattr(kernels, "BACKEND_NAME", "numpy")


def available_backends():
    out = {"numpy": _kernels_np}
    try:
        from . import _kernels_c

        out["cython"] = _kernels_c
    except ImportError:
        pass
    return out
