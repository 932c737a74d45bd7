"""Kernel selection: the compiled extension when importable, else the Python twin."""

import os

from . import _core_py

try:
    if os.environ.get("DFLORENZ_PURE_PYTHON"):
        raise ImportError("pure-Python kernels forced by DFLORENZ_PURE_PYTHON")
    from . import _core as _impl

    BACKEND = "compiled"
except ImportError:  # extension not built
    _impl = _core_py
    BACKEND = "python"

lorenz_run = _impl.lorenz_run
fiber_transit = _impl.fiber_transit
fiber_g = _core_py.fiber_g

__all__ = ["BACKEND", "lorenz_run", "fiber_transit", "fiber_g"]
