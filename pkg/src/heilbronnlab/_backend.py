"""Kernel selection: the compiled extension when importable, else pure Python.

Set ``HEILBRONNLAB_PURE=1`` to force the fallback.
"""

import os

from . import _fallback

if os.environ.get("HEILBRONNLAB_PURE"):
    kernels = _fallback
else:
    try:
        from . import _kernels as kernels
    except ImportError:
        kernels = _fallback

BACKEND = kernels.BACKEND
fallback = _fallback
