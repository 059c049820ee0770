"""Pick the compiled kernels when available, else the pure-Python fallback."""

import os

if os.environ.get("ACTIVEMAP_PURE_PYTHON", "") not in ("", "0"):
    from activemap import _kernels_py as kernels
else:
    try:
        from activemap import _kernels as kernels
    except ImportError:  # extension not built
        from activemap import _kernels_py as kernels

BACKEND = kernels.BACKEND
