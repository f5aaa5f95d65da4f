"""Finite model of a W*-algebra with a faithful normalized trace.

The algebra is ``A = ⊕_γ M_{n(γ)}(C)`` over a finite grid of points with
positive weights ``μ(γ)`` summing to one.  An element is stored fiberwise as a
tuple of square complex matrices.  Everything here is exact linear algebra on
those fibers; no fiber ever talks to another one except through the traces.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    GridMismatchError,
    HypothesisError,
    NotHermitianError,
    NotProjectionError,
    RankError,
)

WEIGHT_TOL = 1e-12
HERMITIAN_TOL = 1e-12
IDEMPOTENT_TOL = 1e-10
ROUNDING_TOL = 1e-8
RANGE_TOL = 1e-10


class ParameterGrid:
    """Grid points with weights and fiber dimensions.

    Parameters
    ----------
    weights : array_like
        Strictly positive weights, normalized to sum to one.
    fiber_dims : sequence of int
        Matrix size ``n(γ)`` of the algebra fiber at each point.
    points : sequence, optional
        Labels for the points (anything hashable); defaults to ``range``.
    """

    __slots__ = ("weights", "fiber_dims", "points")

    def __init__(self, weights, fiber_dims, points=None):
        weights = np.array(weights, dtype=float).ravel()
        fiber_dims = tuple(int(n) for n in fiber_dims)
        if len(weights) == 0:
            raise ValueError("grid must contain at least one point")
        if len(fiber_dims) != len(weights):
            raise ValueError("weights and fiber_dims differ in length")
        if np.any(weights <= 0):
            raise ValueError("weights must be strictly positive (faithful trace)")
        if abs(weights.sum() - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights sum to {weights.sum()!r}, expected 1")
        if min(fiber_dims) < 1:
            raise ValueError("fiber dimensions must be >= 1")
        weights.flags.writeable = False
        self.weights = weights
        self.fiber_dims = fiber_dims
        self.points = tuple(range(len(weights))) if points is None else tuple(points)
        if len(self.points) != len(weights):
            raise ValueError("points and weights differ in length")

    @classmethod
    def uniform(cls, size: int, fiber_dim: int | Sequence[int] = 1, points=None):
        dims = [fiber_dim] * size if np.isscalar(fiber_dim) else list(fiber_dim)
        w = np.full(size, 1.0 / size)
        w[-1] = 1.0 - w[:-1].sum()
        return cls(w, dims, points)

    @classmethod
    def normalized(cls, weights, fiber_dims, points=None):
        w = np.asarray(weights, dtype=float)
        return cls(w / w.sum(), fiber_dims, points)

    def __len__(self):
        return len(self.weights)

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, ParameterGrid):
            return NotImplemented
        return (
            self.fiber_dims == other.fiber_dims
            and np.array_equal(self.weights, other.weights)
            and self.points == other.points
        )

    def __hash__(self):
        return hash((self.fiber_dims, self.weights.tobytes(), self.points))

    def __repr__(self):
        return f"ParameterGrid(size={len(self)}, fiber_dims={self.fiber_dims})"


def _check_grid(a, b):
    if a.grid != b.grid:
        raise GridMismatchError("operands live on different grids")


class AlgebraField:
    """An element of the model algebra: one square matrix per grid point."""

    __slots__ = ("grid", "fibers")
    __array_priority__ = 100

    def __init__(self, grid: ParameterGrid, fibers):
        fibers = tuple(np.asarray(f, dtype=complex) for f in fibers)
        if len(fibers) != len(grid):
            raise GridMismatchError(
                f"{len(fibers)} fibers supplied for a grid of {len(grid)} points"
            )
        for f, n in zip(fibers, grid.fiber_dims):
            if f.shape != (n, n):
                raise GridMismatchError(f"fiber shape {f.shape} != ({n}, {n})")
            f.flags.writeable = False
        self.grid = grid
        self.fibers = fibers

    # -- constructors -------------------------------------------------------
    @classmethod
    def identity(cls, grid):
        return cls(grid, [np.eye(n) for n in grid.fiber_dims])

    @classmethod
    def zeros(cls, grid):
        return cls(grid, [np.zeros((n, n)) for n in grid.fiber_dims])

    @classmethod
    def scalar(cls, grid, values):
        """Central element ``γ ↦ values[γ]·1``."""
        values = np.broadcast_to(np.asarray(values), (len(grid),))
        return cls(grid, [v * np.eye(n) for v, n in zip(values, grid.fiber_dims)])

    @classmethod
    def diagonal(cls, grid, diagonals):
        return cls(grid, [np.diag(np.asarray(d, dtype=complex)) for d in diagonals])

    # -- arithmetic ---------------------------------------------------------
    def adjoint(self):
        return AlgebraField(self.grid, [f.conj().T for f in self.fibers])

    @property
    def H(self):
        return self.adjoint()

    def __add__(self, other):
        if isinstance(other, AlgebraField):
            _check_grid(self, other)
            return AlgebraField(self.grid, [a + b for a, b in zip(self.fibers, other.fibers)])
        return self + AlgebraField.scalar(self.grid, other)

    __radd__ = __add__

    def __neg__(self):
        return AlgebraField(self.grid, [-a for a in self.fibers])

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, c):
        if isinstance(c, AlgebraField):
            return NotImplemented
        return AlgebraField(self.grid, [c * a for a in self.fibers])

    __rmul__ = __mul__

    def __matmul__(self, other):
        _check_grid(self, other)
        return AlgebraField(self.grid, [a @ b for a, b in zip(self.fibers, other.fibers)])

    # -- measurements -------------------------------------------------------
    def norm(self) -> float:
        """C*-norm: sup over fibers of the spectral norm."""
        return max(np.linalg.norm(f, 2) for f in self.fibers)

    def distance(self, other) -> float:
        return (self - other).norm()

    def hermitian_defect(self) -> float:
        return max(np.abs(f - f.conj().T).max() for f in self.fibers)

    def is_hermitian(self, tol=HERMITIAN_TOL) -> bool:
        return self.hermitian_defect() <= tol

    def spectra(self):
        """Ascending eigenvalues of each (Hermitian part of each) fiber."""
        return [np.linalg.eigvalsh(_herm(f)) for f in self.fibers]

    def min_eigenvalue(self) -> float:
        return min(s[0] for s in self.spectra())

    def is_positive(self, tol=1e-10) -> bool:
        return self.is_hermitian(max(HERMITIAN_TOL, tol)) and self.min_eigenvalue() >= -tol

    def allclose(self, other, atol=1e-10) -> bool:
        return self.distance(other) <= atol

    def __repr__(self):
        return f"AlgebraField(grid={self.grid!r})"


class Projection(AlgebraField):
    """An :class:`AlgebraField` certified idempotent and self-adjoint."""

    __slots__ = ()

    def ranks(self):
        return [int(round(np.trace(f).real)) for f in self.fibers]


def _herm(m):
    return 0.5 * (m + m.conj().T)


def _range_projector(basis):
    p = basis @ basis.conj().T
    return _herm(p)


def as_projection(a: AlgebraField, tol=IDEMPOTENT_TOL) -> Projection:
    """Certify ``a`` as a projection and return it typed as such."""
    if isinstance(a, Projection):
        return a
    for f in a.fibers:
        if np.abs(f - f.conj().T).max() > max(HERMITIAN_TOL, tol):
            raise NotProjectionError("fiber is not self-adjoint")
        if f.size and np.abs(f @ f - f).max() > tol:
            raise NotProjectionError("fiber is not idempotent")
        if f.size:
            ev = np.linalg.eigvalsh(_herm(f))
            if np.abs(ev - np.round(ev)).max() > ROUNDING_TOL or ev.min() < -ROUNDING_TOL or ev.max() > 1 + ROUNDING_TOL:
                raise NotProjectionError("fiber eigenvalues are not in {0, 1}")
    return Projection(a.grid, [_herm(f) for f in a.fibers])


def _require_hermitian(a: AlgebraField, tol=1e-10):
    scale = max(1.0, a.norm())
    if a.hermitian_defect() > tol * scale:
        raise NotHermitianError(f"Hermitian defect {a.hermitian_defect():.3e}")


def trace_tau(a: AlgebraField) -> complex:
    """Normalized faithful trace ``Σ_γ μ(γ) tr(a(γ)) / n(γ)``."""
    total = 0j
    for w, n, f in zip(a.grid.weights, a.grid.fiber_dims, a.fibers):
        total += w * np.trace(f) / n
    return total


def center_trace(a: AlgebraField) -> AlgebraField:
    """Center-valued trace: each fiber replaced by its normalized trace times 1."""
    return AlgebraField(
        a.grid, [np.trace(f) / n * np.eye(n) for f, n in zip(a.fibers, a.grid.fiber_dims)]
    )


def functional_calculus(a: AlgebraField, f: Callable[[np.ndarray], np.ndarray]) -> AlgebraField:
    """Apply a real function to a Hermitian field through its spectral decomposition.

    ``f`` receives the array of fiber eigenvalues and must return an array of
    the same shape.
    """
    _require_hermitian(a)
    out = []
    for m in a.fibers:
        s, u = np.linalg.eigh(_herm(m))
        fs = np.asarray(f(s))
        out.append(_herm((u * fs) @ u.conj().T) if np.isrealobj(fs) else (u * fs) @ u.conj().T)
    return AlgebraField(a.grid, out)


def spectral_projection(a: AlgebraField, lower=-np.inf, upper=np.inf, *, closed_lower=False) -> Projection:
    """Spectral projection of a Hermitian field onto ``(lower, upper]`` (or ``[lower, upper]``)."""

    def indicator(s):
        above = s >= lower if closed_lower else s > lower
        return (above & (s <= upper)).astype(float)

    return Projection(a.grid, functional_calculus(a, indicator).fibers)


@dataclass(frozen=True)
class CutoffResult:
    """Outcome of :func:`lemma22_cutoff`.

    ``min_compressed`` is the smallest eigenvalue of ``p a p`` on the range
    of ``p``; by construction it is strictly above ``lambda0``.
    """

    projection: Projection
    lambda0: float
    trace: float
    min_compressed: float
    hypothesis_met: bool


def _cutoff_candidates(spectrum):
    """Cut levels to try, in decreasing order: 1/2 and spectral midpoints below it."""
    pts = np.unique(np.concatenate([[0.0], np.clip(spectrum, 0.0, None)]))
    mids = 0.5 * (pts[1:] + pts[:-1])
    cands = np.concatenate([[0.5], mids[(mids > 0) & (mids < 0.5)]])
    return np.unique(cands)[::-1]


def lemma22_cutoff(a: AlgebraField, epsilon: float, *, strict=True) -> CutoffResult:
    """Spectral cutoff of a positive contraction with large trace.

    For a positive ``a`` with ``‖a‖ ≤ 1`` and ``τ(a) > 1 − ε/2`` returns
    ``p = χ_(λ0, 1](a)`` with ``τ(p) > 1 − ε``; the compression ``p a p`` is
    then invertible in ``pAp`` with spectrum in ``(λ0, 1]``.

    The level is taken as the largest candidate among ``1/2`` and the
    midpoints between consecutive fiber eigenvalues below ``1/2`` that
    achieves the trace bound.  Under the hypothesis ``λ0 = 1/2`` always works.

    With ``strict=False`` a violated trace hypothesis is recorded on the
    result instead of raised; a cutoff that cannot reach ``τ(p) > 1 − ε``
    still raises.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    _require_hermitian(a)
    spectra = a.spectra()
    lo = min(s[0] for s in spectra)
    hi = max(s[-1] for s in spectra)
    if lo < -1e-10 or hi > 1 + 1e-10:
        raise HypothesisError(f"need a positive contraction, spectrum in [{lo:.3g}, {hi:.3g}]", value=(lo, hi))
    tau_a = trace_tau(a).real
    hypothesis = tau_a > 1 - epsilon / 2
    if strict and not hypothesis:
        raise HypothesisError(
            f"tau(a) = {tau_a:.6g} does not exceed 1 - eps/2 = {1 - epsilon / 2:.6g}", value=tau_a
        )

    weights, dims = a.grid.weights, a.grid.fiber_dims
    best = None
    for lam0 in _cutoff_candidates(np.concatenate(spectra)):
        tr = sum(w * np.count_nonzero(s > lam0) / n for w, n, s in zip(weights, dims, spectra))
        if tr > 1 - epsilon:
            best = (lam0, tr)
            break
    if best is None:
        raise HypothesisError("no spectral cutoff reaches tau(p) > 1 - eps", value=tau_a)
    lam0, tr = best
    p = spectral_projection(a, lam0, np.inf)
    above = np.concatenate([s[s > lam0] for s in spectra])
    return CutoffResult(p, float(lam0), float(tr), float(above.min()) if above.size else np.inf, hypothesis)


def range_basis(m: np.ndarray, tol=RANGE_TOL) -> np.ndarray:
    """Orthonormal basis of the column range, by singular-value thresholding."""
    if m.size == 0:
        return np.zeros((m.shape[0], 0), dtype=complex)
    u, s, _ = np.linalg.svd(m, full_matrices=False)
    return u[:, : int(np.count_nonzero(s > tol))]


def _check_projection(*ps):
    return [as_projection(p) for p in ps]


def lattice_join_meet(p: AlgebraField, q: AlgebraField):
    """Return ``(p ∨ q, p ∧ q)`` computed fiberwise from range bases."""
    p, q = _check_projection(p, q)
    _check_grid(p, q)
    joins, meets = [], []
    for a, b in zip(p.fibers, q.fibers):
        n = a.shape[0]
        join = _range_projector(range_basis(np.hstack([a, b])))
        eye = np.eye(n)
        meet = eye - _range_projector(range_basis(np.hstack([eye - a, eye - b])))
        joins.append(join)
        meets.append(_herm(meet))
    return Projection(p.grid, joins), Projection(p.grid, meets)


def _complement_basis(v: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of the range of ``v``."""
    n, r = v.shape
    if r == 0:
        return np.eye(n, dtype=complex)
    u, _, _ = np.linalg.svd(v, full_matrices=True)
    return u[:, r:]


def splice_subprojection(q: AlgebraField, p: AlgebraField, tol=1e-10):
    """Move ``q`` under ``p`` by a unitary.

    Returns ``(q_prime, u)`` with ``q' ≤ p``, ``rank q'(γ) = rank q(γ)`` and
    ``u`` unitary with ``q u = u q'``.  Requires ``rank q(γ) ≤ rank p(γ)``.
    Inside ``Im p`` the subspace closest to ``Im q`` (principal vectors) is
    chosen, so ``q' = q`` whenever ``q ≤ p`` already.
    """
    q, p = _check_projection(q, p)
    _check_grid(q, p)
    qs, us = [], []
    for a, b in zip(q.fibers, p.fibers):
        n = a.shape[0]
        vq = range_basis(a, 0.5)
        vp = range_basis(b, 0.5)
        r = vq.shape[1]
        if r > vp.shape[1]:
            raise RankError(f"rank q = {r} exceeds rank p = {vp.shape[1]}")
        if r == 0 or np.abs(b @ a - a).max() <= tol:
            qs.append(a)
            us.append(np.eye(n, dtype=complex))
            continue
        left, _, right_h = np.linalg.svd(vp.conj().T @ vq, full_matrices=False)
        # W spans the part of Im p closest to Im q, ordered to match vq.
        w = vp @ left[:, :r] @ right_h[:r, :]
        u = np.hstack([vq, _complement_basis(vq)]) @ np.hstack([w, _complement_basis(w)]).conj().T
        qs.append(_range_projector(w))
        us.append(u)
    return Projection(q.grid, qs), AlgebraField(q.grid, us)
