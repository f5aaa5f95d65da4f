"""Compact operator whose top eigenvector lies in the dual module only.

Over ``A = L^∞[0,1]`` sampled at the dyadic intervals ``(2^{-k}, 2^{-(k-1)}]``,
the operator has first row and column ``f_k = b_k a_k`` (``a_k`` the
indicator of interval ``k``).  On interval ``k > 1`` the fiber is the
``2 × 2`` matrix ``[[0, b_k], [b_k, 0]]`` in coordinates ``(1, k)``, with top
eigenpair ``b_k``, ``(e_1 + e_k)/√2``; on interval 1 it is ``b_1 E_11``.
The top eigenvector has ``⟨x,x⟩ = 1`` but its coordinate tails never decay
in sup norm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import ParameterGrid
from .diagonalizer import ModuleOperator, SpectralDecomposition, compactness_profile, diagonalize
from .module import ModuleVector, TailProfile, tail_profile


def dyadic_grid(levels: int) -> ParameterGrid:
    """One point per interval ``(2^{-k}, 2^{-(k-1)}]``, ``k = 1 … levels``.

    Weights are the interval lengths renormalized to sum to 1 (the
    truncation drops ``(0, 2^{-levels}]``).
    """
    if levels < 1:
        raise ValueError("levels must be at least 1")
    k = np.arange(1, levels + 1)
    lengths = 2.0 ** -k
    mids = 0.75 * 2.0 ** (1 - k)
    return ParameterGrid(lengths / lengths.sum(), [1] * levels, list(mids))


def default_b(levels: int) -> np.ndarray:
    return 2.0 ** -np.arange(1, levels + 1)


def example35_operator(levels: int, b=None) -> ModuleOperator:
    """The operator with first row/column ``(f_1, f_2, …)`` on ``N = levels`` coordinates."""
    b = default_b(levels) if b is None else np.asarray(b, dtype=float)
    if b.shape != (levels,):
        raise ValueError("need one b_k per level")
    grid = dyadic_grid(levels)
    fibers = []
    for k in range(levels):
        f = np.zeros((levels, levels))
        f[0, k] = f[k, 0] = b[k]
        fibers.append(f)
    return ModuleOperator(grid, levels, fibers)


def expected_top_vector(levels: int) -> ModuleVector:
    """``x_1 = a_1 + Σ_{k>1} a_k/√2`` and ``x_k = a_k/√2``, fiberwise."""
    grid = dyadic_grid(levels)
    fibers = []
    for k in range(levels):
        v = np.zeros((levels, 1))
        if k == 0:
            v[0, 0] = 1.0
        else:
            v[0, 0] = v[k, 0] = np.sqrt(0.5)
        fibers.append(v)
    return ModuleVector(grid, levels, fibers)


@dataclass
class Example35:
    levels: int
    b: np.ndarray
    decomposition: SpectralDecomposition
    lambda1: np.ndarray
    eigenvalue_error: float
    vector_error: float
    """``max_γ`` distance of ``x_1(γ)`` to the expected vector up to sign."""
    inner_square_error: float
    tails: TailProfile
    compactness: np.ndarray

    def report(self) -> str:
        lines = [
            f"dyadic example, {self.levels} levels",
            f"max |lambda_1(t) - b_k|        {self.eigenvalue_error:.3e}",
            f"max |x_1 - (e_1+e_k)/sqrt2|    {self.vector_error:.3e}  (up to sign)",
            f"max |<x_1,x_1> - 1|            {self.inner_square_error:.3e}",
            "sup tails t_m, m=0..N-1:       " + " ".join(f"{t:.3g}" for t in self.tails.sup_tails),
            "compactness c_n, n=0..N:       " + " ".join(f"{c:.3g}" for c in self.compactness),
            f"tail-profile verdict: {self.tails.verdict}",
        ]
        return "\n".join(lines)


def run_example35(levels: int = 12, b=None) -> Example35:
    b = default_b(levels) if b is None else np.asarray(b, dtype=float)
    K = example35_operator(levels, b)
    dec = diagonalize(K, max_terms=1)
    top = dec.terms[0]
    lam = np.array([f[0, 0].real for f in top.lam.fibers])
    expected = expected_top_vector(levels)
    verr = 0.0
    for x, e in zip(top.x.fibers, expected.fibers):
        verr = max(verr, min(np.abs(x - e).max(), np.abs(x + e).max()))
    ip = max(abs(np.vdot(x, x) - 1.0) for x in top.x.fibers)
    return Example35(
        levels,
        b,
        dec,
        lam,
        float(np.abs(lam - b).max()),
        float(verr),
        float(ip),
        tail_profile(top.x),
        compactness_profile(K),
    )
