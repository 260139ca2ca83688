"""Select the compiled core when available, else the pure-Python fallback.

Set ``IDP_BACKEND=python`` to force the fallback.
"""
import os

from . import _fallback

fallback = _fallback

if os.environ.get("IDP_BACKEND", "").lower() in ("python", "fallback", "py"):
    core = _fallback
else:
    try:
        from . import _core as core
    except ImportError:  # extension not built
        core = _fallback

NAME = "cython" if core is not _fallback else "python"
