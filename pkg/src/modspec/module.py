"""Truncated Hilbert A-modules.

A vector of the truncated standard module has ``N`` coordinates, each an
element of the algebra.  Fiberwise we store the whole vector as one
``(N·r) × n`` matrix whose ``N`` row blocks are the coordinates; ``r = n``
for the standard module ``H_A``.  With this layout

* the inner product is ``⟨x, y⟩(γ) = X(γ)* Y(γ)``,
* the right action of ``a ∈ A`` is ``X(γ) a(γ)``,
* an adjointable operator acts by a left ``(N·r) × (N·r)`` matrix,

so A-linearity of operators is automatic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .algebra import (
    AlgebraField,
    ParameterGrid,
    Projection,
    _check_grid,
    as_projection,
    functional_calculus,
    lemma22_cutoff,
    splice_subprojection,
    trace_tau,
)
from .errors import GridMismatchError, HypothesisError, NotProjectionError, RankError

ORTHO_TOL = 1e-9
TAIL_THRESHOLD = 1e-6


class ModuleVector:
    """Element of the truncated module; see the module docstring for layout."""

    __slots__ = ("grid", "length", "fibers")

    def __init__(self, grid: ParameterGrid, length: int, fibers):
        fibers = tuple(np.asarray(f, dtype=complex) for f in fibers)
        if len(fibers) != len(grid):
            raise GridMismatchError("one fiber per grid point required")
        for f, n in zip(fibers, grid.fiber_dims):
            if f.ndim != 2 or f.shape[1] != n or f.shape[0] % length:
                raise GridMismatchError(
                    f"fiber of shape {f.shape} is not {length} blocks of width {n}"
                )
            f.flags.writeable = False
        self.grid = grid
        self.length = int(length)
        self.fibers = fibers

    @classmethod
    def zeros(cls, grid, length, rows=None):
        rows = grid.fiber_dims if rows is None else rows
        return cls(grid, length, [np.zeros((length * r, n)) for r, n in zip(rows, grid.fiber_dims)])

    @classmethod
    def basis(cls, grid, length, m):
        """Standard basis vector ``e_m`` (0-based ``m``) of ``H_A``."""
        fibers = []
        for n in grid.fiber_dims:
            f = np.zeros((length * n, n), dtype=complex)
            f[m * n:(m + 1) * n] = np.eye(n)
            fibers.append(f)
        return cls(grid, length, fibers)

    @classmethod
    def from_coords(cls, coords: Sequence[AlgebraField]):
        """Build from ``N`` algebra elements (the coordinates ``x_1 … x_N``)."""
        grid = coords[0].grid
        for c in coords:
            _check_grid(c, coords[0])
        fibers = [np.vstack([c.fibers[g] for c in coords]) for g in range(len(grid))]
        return cls(grid, len(coords), fibers)

    def rows(self, g):
        return self.fibers[g].shape[0] // self.length

    def coordinate_blocks(self, g):
        """Fiber ``g`` as an array of shape ``(N, r, n)``."""
        f = self.fibers[g]
        return f.reshape(self.length, self.rows(g), f.shape[1])

    def coord(self, m) -> AlgebraField:
        if any(self.rows(g) != n for g, n in enumerate(self.grid.fiber_dims)):
            raise GridMismatchError("coordinates are algebra elements only in H_A")
        return AlgebraField(self.grid, [self.coordinate_blocks(g)[m] for g in range(len(self.grid))])

    def _like(self, fibers):
        return ModuleVector(self.grid, self.length, fibers)

    def _check(self, other):
        _check_grid(self, other)
        if self.length != other.length or any(a.shape != b.shape for a, b in zip(self.fibers, other.fibers)):
            raise GridMismatchError("module vectors differ in shape")

    def __add__(self, other):
        self._check(other)
        return self._like([a + b for a, b in zip(self.fibers, other.fibers)])

    def __sub__(self, other):
        self._check(other)
        return self._like([a - b for a, b in zip(self.fibers, other.fibers)])

    def __neg__(self):
        return self._like([-a for a in self.fibers])

    def __mul__(self, a):
        """Right action ``x·a`` for ``a ∈ A``; plain scalars scale."""
        if isinstance(a, AlgebraField):
            _check_grid(self, a)
            return self._like([x @ f for x, f in zip(self.fibers, a.fibers)])
        return self._like([a * x for x in self.fibers])

    def __rmul__(self, c):
        if isinstance(c, AlgebraField):
            return NotImplemented
        return self * c

    def norm(self) -> float:
        return np.sqrt(inner(self, self).norm())

    def trace_norm(self) -> float:
        return float(np.sqrt(max(trace_tau(inner(self, self)).real, 0.0)))

    def distance(self, other) -> float:
        return (self - other).norm()

    def __repr__(self):
        return f"ModuleVector(length={self.length}, grid={self.grid!r})"


def inner(x: ModuleVector, y: ModuleVector) -> AlgebraField:
    """A-valued inner product ``⟨x, y⟩ = Σ_m x_m* y_m``."""
    x._check(y)
    return AlgebraField(x.grid, [a.conj().T @ b for a, b in zip(x.fibers, y.fibers)])


def normalize_over_A(x: ModuleVector, epsilon: float = 0.5):
    """Rescale ``x`` so that its inner square becomes a projection of large trace.

    Applies :func:`lemma22_cutoff` to ``⟨x,x⟩/‖⟨x,x⟩‖`` and returns
    ``(x·b, p)`` with ``b = (p⟨x,x⟩p)^{-1/2}`` on ``Im p``; then
    ``⟨x·b, x·b⟩ = p`` and ``τ(p) > 1 − ε``.
    """
    h = inner(x, x)
    scale = h.norm()
    if scale == 0:
        raise HypothesisError("cannot normalize the zero vector", value=0.0)
    try:
        cut = lemma22_cutoff(h * (1.0 / scale), epsilon, strict=False)
    except HypothesisError as exc:
        raise HypothesisError(
            f"normalization cannot reach tau(p) > 1 - {epsilon}: {exc}", value=trace_tau(h).real / scale
        ) from exc
    p = cut.projection
    level = cut.lambda0 * scale

    def inv_sqrt(s):
        out = np.zeros_like(s)
        keep = s > level
        out[keep] = 1.0 / np.sqrt(s[keep])
        return out

    b = functional_calculus(h, inv_sqrt)
    return x * b, p


def _generator_projections(generators, tol=1e-8):
    ps = []
    for i, g in enumerate(generators):
        for j, f in enumerate(generators[:i]):
            if inner(f, g).norm() > tol:
                raise NotProjectionError(f"generators {j} and {i} are not orthogonal")
        try:
            ps.append(as_projection(inner(g, g), tol=tol))
        except NotProjectionError as exc:
            raise NotProjectionError(f"generator {i} inner square is not a projection") from exc
    return ps


def project_onto_span(x: ModuleVector, generators: Sequence[ModuleVector], *, check=True) -> ModuleVector:
    """Orthogonal projection ``Σ_i g_i ⟨g_i, x⟩`` onto the span of orthonormalized generators."""
    if check:
        _generator_projections(generators)
    out = ModuleVector.zeros(x.grid, x.length, [x.rows(g) for g in range(len(x.grid))])
    for g in generators:
        out = out + g * inner(g, x)
    return out


def _sub_projection(q: AlgebraField, ranks):
    """A subprojection of ``q`` with the requested rank per fiber."""
    out = []
    for f, r in zip(q.fibers, ranks):
        s, u = np.linalg.eigh(0.5 * (f + f.conj().T))
        v = u[:, ::-1][:, :r]
        out.append(v @ v.conj().T)
    return Projection(q.grid, out)


def complement_basis(
    generators: Sequence[ModuleVector],
    count: int,
    epsilon_schedule: Sequence[float] | None = None,
    *,
    length: int | None = None,
    grid: ParameterGrid | None = None,
) -> list[ModuleVector]:
    """Mutually orthogonal vectors orthogonal to ``generators``.

    Sweeps the standard basis ``e_1, e_2, …``, removes the part already in
    the span built so far, and normalizes the residual over ``A`` with
    ``ε_k`` from the schedule (default ``1/k``, floored so that ``τ(p) > 1/2``).
    Vectors whose inner square is a proper projection are then spliced
    together greedily: a piece of a later vector, rotated by the unitary of
    :func:`splice_subprojection`, fills the defect ``1 − p`` of an earlier
    one.  Returns ``count`` vectors with projection inner squares.
    """
    if generators:
        grid, length = generators[0].grid, generators[0].length
    elif grid is None or length is None:
        raise ValueError("grid and length are required when there are no generators")
    for g in generators:
        if g.length != length or g.grid != grid:
            raise GridMismatchError("generators differ in shape")
    if generators and any(generators[0].rows(g) != n for g, n in enumerate(grid.fiber_dims)):
        raise GridMismatchError("complement_basis works in the standard module H_A")
    gen_proj = _generator_projections(generators)
    budget = sum(trace_tau(p).real for p in gen_proj)
    if count > length - budget + 1e-9:
        raise RankError(f"count {count} exceeds the residual rank budget {length - budget:.6g}")

    span = list(generators)
    found: list[tuple[ModuleVector, Projection]] = []
    k = 0
    # Revisit every e_m until a whole pass adds nothing: a cutoff may leave
    # part of a residual behind, to be picked up on a later pass.
    for _ in range(length * max(grid.fiber_dims) + 1):
        added = False
        for m in range(length):
            y = ModuleVector.basis(grid, length, m)
            y = y - project_onto_span(y, span, check=False)
            if y.norm() < 1e-8:
                continue
            k += 1
            eps = 1.0 / k
            if epsilon_schedule is not None and k <= len(epsilon_schedule):
                eps = epsilon_schedule[k - 1]
            try:
                h, p = normalize_over_A(y, min(max(eps, 1e-12), 1.0 - 1e-12))
            except HypothesisError:
                # residual too thin for this ε: keep its whole support
                h, p = normalize_over_A(y, 1.0 - 1e-12)
            span.append(h)
            found.append((h, p))
            added = True
        if not added:
            break

    merged = _splice_greedy(found)
    traces = [trace_tau(p).real for _, p in merged]
    order = sorted(range(len(merged)), key=lambda i: (abs(traces[i] - 1.0) > 1e-9, -traces[i], i))
    if len(order) < count:
        raise RankError(f"only {len(order)} complement vectors exist at this truncation")
    return [merged[i][0] for i in order[:count]]


def _splice_greedy(found):
    """Fill inner-square defects of earlier vectors with pieces of later ones.

    For ``h_i`` with defect ``q = 1 − p_i`` and a later ``h_j``, the splice
    gives ``q' ≤ p_j`` and a unitary ``u`` with ``q u = u q'``; then
    ``r = h_j q' u*`` has ``⟨r, r⟩ = q`` and ``h_i + r`` has inner square
    ``p_i + q``.  What is left of ``h_j`` is ``h_j (p_j − q')``.
    """
    items = [list(hp) for hp in found]
    for i in range(len(items)):
        for j in range(i + 1, len(items)):
            h_i, p_i = items[i]
            h_j, p_j = items[j]
            defect = AlgebraField.identity(h_i.grid) - p_i
            take = [min(a, b) for a, b in zip(_ranks(defect), _ranks(p_j))]
            if not any(take):
                continue
            q = _sub_projection(defect, take)
            q_prime, u = splice_subprojection(q, p_j)
            r = h_j * (q_prime @ u.adjoint())
            items[i] = [h_i + r, as_projection(p_i + q)]
            items[j] = [h_j * (p_j - q_prime), as_projection(p_j - q_prime)]
    return [(h, p) for h, p in items if trace_tau(p).real > 1e-12]


def _ranks(p: AlgebraField):
    return [int(round(np.trace(f).real)) for f in p.fibers]


@dataclass(frozen=True)
class TailProfile:
    """Sup-norm and trace-norm tails of a module vector.

    ``sup_tails[m] = sup_γ ‖Σ_{j>m} x_j(γ)* x_j(γ)‖`` and
    ``trace_tails[m] = τ(Σ_{j>m} x_j* x_j)`` for ``m = 0 … N−1``
    (coordinates counted from 1).
    """

    sup_tails: np.ndarray
    trace_tails: np.ndarray
    threshold: float = TAIL_THRESHOLD

    @property
    def verdict(self) -> str:
        if np.any(self.sup_tails < self.threshold):
            return "H_A-like"
        return "H*_A-only at this truncation"

    @property
    def decay_index(self):
        """First ``m`` at which the sup tail drops below the threshold, else ``None``."""
        hit = np.nonzero(self.sup_tails < self.threshold)[0]
        return int(hit[0]) if hit.size else None


def tail_profile(x: ModuleVector, threshold: float = TAIL_THRESHOLD) -> TailProfile:
    N = x.length
    sup = np.zeros(N)
    tr = np.zeros(N)
    weights, dims = x.grid.weights, x.grid.fiber_dims
    for g in range(len(x.grid)):
        blocks = x.coordinate_blocks(g)
        grams = np.einsum("mri,mrj->mij", blocks.conj(), blocks)
        # coordinates are 1-based in t_m = Σ_{j>m}, so t_m sums grams[m:]
        tails = np.cumsum(grams[::-1], axis=0)[::-1]
        for m in range(N):
            sup[m] = max(sup[m], np.linalg.norm(tails[m], 2))
            tr[m] += weights[g] * np.trace(tails[m]).real / dims[g]
    return TailProfile(sup, tr, threshold)
