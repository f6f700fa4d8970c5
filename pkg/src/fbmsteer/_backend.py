"""Kernel backend selection.

The compiled core is preferred; set ``FBMSTEER_PURE_PYTHON=1`` to force the
numpy fallback.
"""

import os

from . import _pycore

try:
    from . import _ccore
except ImportError:  # extension not built
    _ccore = None

if _ccore is not None and not os.environ.get("FBMSTEER_PURE_PYTHON"):
    core = _ccore
    NAME = "cython"
else:
    core = _pycore
    NAME = "python"


def get(name=None):
    """Return the kernel module called ``name`` ("cython" or "python")."""
    if name is None:
        return core
    if name == "python":
        return _pycore
    if name == "cython":
        if _ccore is None:
            raise ImportError("compiled core fbmsteer._ccore is not built")
        return _ccore
    raise ValueError(f"unknown backend {name!r}")


def available():
    return ["cython", "python"] if _ccore is not None else ["python"]
