"""Backend selection for the simplex iteration kernels.

The compiled extension is used when it was built; otherwise the numpy
implementation is used. Setting ``HEMSOPT_PURE_PYTHON=1`` forces the
fallback (used by the test-suite and the benchmark to compare both).
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("HEMSOPT_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        _impl = _compiled
        BACKEND = "cython"

OPTIMAL = _kernels_py.OPTIMAL
INFEASIBLE = _kernels_py.INFEASIBLE
LIMIT = _kernels_py.LIMIT
UNBOUNDED = _kernels_py.UNBOUNDED
BASIC = _kernels_py.BASIC
AT_LOWER = _kernels_py.AT_LOWER
AT_UPPER = _kernels_py.AT_UPPER


def get_backend(name=None):
    """Return the kernel module for ``name`` ('python', 'cython' or None for the active one)."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")
