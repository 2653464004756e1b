"""Backend selection for the hot loops.

The compiled extension is used when it imported cleanly; otherwise, or when
the environment variable ``FRACPDE_PURE_PYTHON`` is set to a non-empty value
other than ``0``, the numpy implementations are used. ``BACKEND`` names the
active choice and ``backend_module(name)`` returns either one explicitly,
which the benchmark and the agreement tests rely on.
"""

import os

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_force_py = os.environ.get("FRACPDE_PURE_PYTHON", "") not in ("", "0")

if _compiled is not None and not _force_py:
    _active = _compiled
    BACKEND = "cython"
else:
    _active = _kernels_py
    BACKEND = "python"

COMPILED_AVAILABLE = _compiled is not None


def backend_module(name=None):
    """Return the kernel module for ``name`` ("cython" or "python"), default active."""
    if name is None:
        return _active
    if name == "python":
        return _kernels_py
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


l1_caputo = _active.l1_caputo
product_convolution = _active.product_convolution
flux_matrix = _active.flux_matrix
volterra_poly = _active.volterra_poly
green_sum = _active.green_sum
