"""Select the compiled kernels when available, the numpy twin otherwise.

Set ``GAUSSLIKE_PURE=1`` to force the fallback.
"""
import os

from . import _kernels_py as pure

compiled = None
if not os.environ.get("GAUSSLIKE_PURE"):
    try:
        from . import _kernels as compiled  # type: ignore[no-redef]
    except ImportError:
        compiled = None

kernels = compiled if compiled is not None else pure
NAME = "cython" if compiled is not None else "numpy"
