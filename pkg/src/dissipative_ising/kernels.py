"""Backend selection for the trajectory kernel.

The compiled extension is used when it imports; otherwise the numpy
implementation.  Set ``DISSIPATIVE_ISING_PURE_PYTHON=1`` to force the
fallback.
"""
from __future__ import annotations

import os

from . import _kernels_py

_compiled = None
if not os.environ.get("DISSIPATIVE_ISING_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled

DEFAULT_BACKEND = "compiled" if _compiled is not None else "python"


def get_backend(name: str | None = None):
    name = name or DEFAULT_BACKEND
    if name not in BACKENDS:
        raise ValueError(f"kernel backend {name!r} unavailable; have {sorted(BACKENDS)}")
    return BACKENDS[name]


def propagate(*args, backend: str | None = None):
    return get_backend(backend).propagate(*args)
