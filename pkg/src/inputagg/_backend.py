"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy fallback.
Set ``INPUTAGG_PURE_PYTHON=1`` to force the fallback.
"""

import importlib
import os

from . import _kernels_py


def load(name):
    """Return the kernel module for ``name`` ('cython' or 'python')."""
    if name == "python":
        return _kernels_py
    if name == "cython":
        return importlib.import_module("inputagg._kernels")
    raise ValueError(f"unknown backend {name!r}")


def available():
    names = ["python"]
    try:
        load("cython")
    except ImportError:
        pass
    else:
        names.insert(0, "cython")
    return names


if os.environ.get("INPUTAGG_PURE_PYTHON", "") not in ("", "0"):
    kernels = _kernels_py
    BACKEND = "python"
else:
    try:
        kernels = load("cython")
        BACKEND = "cython"
    except ImportError:
        kernels = _kernels_py
        BACKEND = "python"
