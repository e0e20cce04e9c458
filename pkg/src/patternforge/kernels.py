"""Kernel backend selection.

The numba backend is used when numba imports and ``PATTERNFORGE_NO_JIT`` is
unset (or ``0``); otherwise the pure-numpy backend runs. Both expose:

``angie, jittered, additive, interval_counts, grid_hits, driver_trace``
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _numpy_kernels

_DISABLED = os.environ.get("PATTERNFORGE_NO_JIT", "").strip().lower() not in ("", "0", "false", "no")

try:
    if _DISABLED:
        raise ImportError("numba disabled by PATTERNFORGE_NO_JIT")
    from . import _jit_kernels
except ImportError:
    _jit_kernels = None

BACKENDS = {"numpy": _numpy_kernels}
if _jit_kernels is not None:
    BACKENDS["numba"] = _jit_kernels

ACTIVE = "numba" if "numba" in BACKENDS else "numpy"


def backend(name: str | None = None) -> ModuleType:
    """Kernel module ``name`` (default: the active one)."""
    name = name or ACTIVE
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} unavailable; have {sorted(BACKENDS)}") from None
