"""Pure-Python versions of the compiled kernels (same signatures)."""

import numpy as np


def hermite_table(x, count):
    """Normalized Hermite functions ``ψ_0 … ψ_{count-1}`` at the points ``x``."""
    x = np.ascontiguousarray(x, dtype=float)
    out = np.zeros((count, x.size))
    if count == 0:
        return out
    out[0] = np.pi ** -0.25 * np.exp(-0.5 * x * x)
    if count > 1:
        out[1] = np.sqrt(2.0) * x * out[0]
    for m in range(1, count - 1):
        out[m + 1] = np.sqrt(2.0 / (m + 1)) * x * out[m] - np.sqrt(m / (m + 1.0)) * out[m - 1]
    return out

