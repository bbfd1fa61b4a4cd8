"""Kernel backend selection.

The compiled Cython kernels are used when importable; otherwise the numpy
fallback in ``_pykernels`` is used.  Set ``NEIGHBOURTEXT_KERNELS=python`` to
force the fallback.
"""
from __future__ import annotations

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("NEIGHBOURTEXT_KERNELS", "").lower() != "python":
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]
    except ImportError:  # extension not built
        _impl = _pykernels
    else:
        BACKEND = "cython"

haversine_matrix = _impl.haversine_matrix
nearest_within = _impl.nearest_within
cd_solve = _impl.cd_solve


def available_backends() -> dict:
    """Map backend name to kernel module for every importable backend."""
    found = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        found["cython"] = _ckernels
    return found
