# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loop: Hermite-function tables for the oscillator quadrature."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt, M_PI

cnp.import_array()


def hermite_table(double[::1] x, Py_ssize_t count):
    """Normalized Hermite functions ``ψ_0 … ψ_{count-1}`` at the points ``x``.

    Uses the stable three-term recurrence
    ``ψ_{m+1} = sqrt(2/(m+1)) x ψ_m − sqrt(m/(m+1)) ψ_{m-1}``.
    """
    cdef Py_ssize_t npts = x.shape[0], m, j
    out = np.zeros((count, npts), dtype=np.float64)
    cdef double[:, ::1] h = out
    cdef double norm = M_PI ** -0.25
    cdef double a, b, xj
    if count == 0:
        return out
    for j in range(npts):
        xj = x[j]
        h[0, j] = norm * exp(-0.5 * xj * xj)
    if count > 1:
        for j in range(npts):
            h[1, j] = sqrt(2.0) * x[j] * h[0, j]
    for m in range(1, count - 1):
        a = sqrt(2.0 / (m + 1))
        b = sqrt(m / (m + 1.0))
        for j in range(npts):
            h[m + 1, j] = a * x[j] * h[m, j] - b * h[m - 1, j]
    return out

