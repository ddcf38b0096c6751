"""Select the mining kernel backend at import time.

The compiled extension is preferred; setting ``FWSCOPE_PURE_PYTHON=1`` or a
missing build falls back to the pure-Python twin.
"""

from __future__ import annotations

import importlib
import os
from types import ModuleType

BACKENDS = ("cython", "python")
_MODULES = {"cython": "fwscope._ckernels", "python": "fwscope._pykernels"}


def load(name: str) -> ModuleType:
    """Import one backend by name; raises ImportError if it is unavailable."""
    if name not in _MODULES:
        raise ValueError(f"unknown kernel backend {name!r}")
    return importlib.import_module(_MODULES[name])


def available() -> list[str]:
    out = []
    for name in BACKENDS:
        try:
            load(name)
        except ImportError:
            continue
        out.append(name)
    return out


def _select() -> tuple[str, ModuleType]:
    if os.environ.get("FWSCOPE_PURE_PYTHON", "") not in ("", "0"):
        return "python", load("python")
    try:
        return "cython", load("cython")
    except ImportError:
        return "python", load("python")


BACKEND, _impl = _select()
count_extensions = _impl.count_extensions
project = _impl.project
