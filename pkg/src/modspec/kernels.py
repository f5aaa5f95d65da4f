"""Kernel selection: the compiled extension when built, else the Python fallback.

Set ``MODSPEC_PURE_PYTHON=1`` to force the fallback.
"""

import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("MODSPEC_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py


def hermite_table(x, count: int) -> np.ndarray:
    return _impl.hermite_table(np.ascontiguousarray(x, dtype=float), int(count))

