"""Pick the compiled kernels when available, else the numpy fallback.

Set ``LIFEINS_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py
from ._kernels_py import N_PARAMS  # noqa: F401  (parameter layout is shared)

BACKEND = "python"
simulate_policy = _kernels_py.simulate_policy
gompertz_sums = _kernels_py.gompertz_sums
column_counts = _kernels_py.column_counts

if os.environ.get("LIFEINS_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        BACKEND = "cython"
        simulate_policy = _compiled.simulate_policy
        gompertz_sums = _compiled.gompertz_sums
        column_counts = _compiled.column_counts


def backends() -> dict:
    """All importable backends keyed by name (used by tests and the benchmark)."""
    found = {"python": _kernels_py}
    try:
        from . import _kernels as compiled

        found["cython"] = compiled
    except ImportError:
        pass
    return found
