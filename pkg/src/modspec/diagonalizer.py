"""Operator-valued diagonalization of self-adjoint module operators.

The engine repeats four steps on each fiber of a compact self-adjoint
operator ``K``:

1. the cut level ``λ(γ) = inf{λ : φ(γ; λ) ≤ target}`` where ``φ`` counts
   eigenvalues strictly above ``λ`` in units of the fiber rank;
2. the sandwich ``P1 = χ_(λ,∞)(K) ≤ P ≤ P2 = χ_[λ,∞)(K)`` with
   ``T̄(P) = target``, the boundary eigenspace filled in a fixed order;
3. a generator ``x`` of ``Im P`` with ``⟨x,x⟩`` a projection and the
   eigenvalue ``λ_i = ⟨x, Kx⟩ ∈ A``;
4. compression of ``K`` to the orthogonal complement of ``Im P``.

Operators that are not positive definite are first split into positive,
kernel and negative parts; each part is diagonalized on its own.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .algebra import (
    AlgebraField,
    ParameterGrid,
    Projection,
    _check_grid,
    _herm,
    range_basis,
)
from .errors import GridMismatchError, NotHermitianError, RankError
from .module import ModuleVector

log = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-12
ZERO_TOL = 1e-10
DEGENERACY_TOL = 1e-10
COMMUTATOR_TOL = 1e-9
ORTHONORMALITY_TOL = 1e-8
RESIDUAL_TOL = 1e-7
ORDERING_TOL = 1e-8
COMPARE_TOL = 1e-7
GAUGE_OVERLAP_MIN = 0.1


class ModuleOperator:
    """Adjointable operator on the truncated module, one matrix per grid point.

    Fiber ``γ`` is an ``(N·r) × (N·r)`` matrix read as an ``N × N`` array of
    ``r × r`` blocks, acting on vectors by left multiplication; it therefore
    commutes with the right action of the algebra.
    """

    __slots__ = ("grid", "length", "fibers", "_eig")

    def __init__(self, grid: ParameterGrid, length: int, fibers):
        fibers = tuple(np.asarray(f, dtype=complex) for f in fibers)
        if len(fibers) != len(grid):
            raise GridMismatchError("one fiber per grid point required")
        for f in fibers:
            if f.ndim != 2 or f.shape[0] != f.shape[1] or f.shape[0] % length:
                raise GridMismatchError(f"fiber shape {f.shape} is not {length} square blocks")
            f.flags.writeable = False
        self.grid = grid
        self.length = int(length)
        self.fibers = fibers
        self._eig = [None] * len(fibers)

    @classmethod
    def from_blocks(cls, coords: Sequence[Sequence[AlgebraField]]):
        """Operator with matrix entries ``K_ij ∈ A`` acting by left multiplication."""
        N = len(coords)
        grid = coords[0][0].grid
        fibers = []
        for g in range(len(grid)):
            fibers.append(np.block([[coords[i][j].fibers[g] for j in range(N)] for i in range(N)]))
        return cls(grid, N, fibers)

    @classmethod
    def identity(cls, grid, length):
        return cls(grid, length, [np.eye(length * n) for n in grid.fiber_dims])

    def rows(self, g):
        return self.fibers[g].shape[0] // self.length

    def dim(self, g):
        return self.fibers[g].shape[0]

    def eigh(self, g):
        """Cached ascending eigendecomposition of fiber ``g``."""
        if self._eig[g] is None:
            self._eig[g] = np.linalg.eigh(_herm(self.fibers[g]))
        return self._eig[g]

    def spectrum(self, g):
        return self.eigh(g)[0]

    def apply(self, x: ModuleVector) -> ModuleVector:
        _check_grid(self, x)
        return ModuleVector(x.grid, x.length, [k @ f for k, f in zip(self.fibers, x.fibers)])

    __call__ = apply

    def adjoint(self):
        return ModuleOperator(self.grid, self.length, [f.conj().T for f in self.fibers])

    def norm(self) -> float:
        return max(np.abs(self.spectrum(g)).max() if self.dim(g) else 0.0 for g in range(len(self.grid)))

    def hermitian_defect(self) -> float:
        return max(np.abs(f - f.conj().T).max() for f in self.fibers)

    def is_hermitian(self, tol=HERMITIAN_TOL) -> bool:
        return self.hermitian_defect() <= tol * max(1.0, max(np.abs(f).max() for f in self.fibers))

    def min_eigenvalue(self) -> float:
        return min(self.spectrum(g)[0] for g in range(len(self.grid)))

    def scaled(self, c):
        return ModuleOperator(self.grid, self.length, [c * f for f in self.fibers])

    def __neg__(self):
        return self.scaled(-1.0)

    def __repr__(self):
        return f"ModuleOperator(length={self.length}, grid={self.grid!r})"


def _require_hermitian(K: ModuleOperator):
    if not K.is_hermitian():
        raise NotHermitianError(f"operator Hermitian defect {K.hermitian_defect():.3e}")


# ---------------------------------------------------------------------------
# cut level and sandwich
# ---------------------------------------------------------------------------

def counting_function(K: ModuleOperator, g: int, level: float) -> float:
    """``φ(γ; level)``: eigenvalues of ``K(γ)`` strictly above ``level``, over ``n(γ)``."""
    if np.isnan(level):
        raise ValueError("level is NaN")
    return np.count_nonzero(K.spectrum(g) > level) / K.grid.fiber_dims[g]


def _cut_rank(target, n):
    """Integer part of ``target·n`` used by the infimum in the cut level."""
    return int(np.floor(target * n + 1e-9))


def _cut_level(spectrum_desc, target, n):
    r = _cut_rank(target, n)
    if len(spectrum_desc) == 0:
        return np.nan
    return float(spectrum_desc[min(r, len(spectrum_desc) - 1)])


def lambda_cut(K: ModuleOperator, target: float = 1.0) -> AlgebraField:
    """Scalar field ``λ(γ) = inf{λ : φ(γ; λ) ≤ target}`` over spectral breakpoints."""
    if not target > 0:
        raise ValueError("target must be positive")
    values = []
    for g, n in enumerate(K.grid.fiber_dims):
        values.append(_cut_level(K.spectrum(g)[::-1], target, n))
    return AlgebraField.scalar(K.grid, values)


@dataclass(frozen=True)
class Sandwich:
    P1: "OperatorProjection"
    P2: "OperatorProjection"
    P: "OperatorProjection"
    ranks: tuple
    exact: bool
    """False if ``target·n(γ)`` was not an integer somewhere (nearest integer used)."""


def _fill_indices(candidates, count, fill_order, rng):
    if count <= 0:
        return []
    if fill_order == "ascending":
        return list(candidates[:count])
    if fill_order == "descending":
        return list(candidates[::-1][:count])
    if fill_order == "random":
        rng = np.random.default_rng() if rng is None else rng
        return list(rng.permutation(candidates)[:count])
    raise ValueError(f"unknown fill order {fill_order!r}")


def _target_rank(target, n, dim):
    """Nearest integer to ``target·n`` (halves round up), at least 1, at most ``dim``."""
    want = target * n
    rank = int(np.floor(want + 0.5))
    exact = abs(want - rank) <= 1e-9
    return min(max(rank, 1), dim), exact


def _sandwich_fiber(s, u, level, target, n, fill_order, rng):
    """Indices of the eigenvectors forming P1, P2 and P for one fiber.

    ``s`` ascending eigenvalues, ``u`` eigenvectors.  Returns boolean masks
    over the eigenvector columns and whether ``target·n`` was an integer.
    """
    tol = DEGENERACY_TOL * max(1.0, abs(level))
    p1 = s > level + tol
    p2 = s >= level - tol
    rank, exact = _target_rank(target, n, len(s))
    boundary = np.nonzero(p2 & ~p1)[0]
    need = rank - int(p1.sum())
    if need < 0 or need > len(boundary):
        raise RankError("cut level does not bracket the target rank")
    chosen = _fill_indices(boundary, need, fill_order, rng)
    p = p1.copy()
    p[chosen] = True
    return p1, p2, p, exact


def sandwich_projections(
    K: ModuleOperator,
    lambda_field: AlgebraField | None = None,
    target: float = 1.0,
    *,
    fill_order: str = "ascending",
    rng=None,
) -> Sandwich:
    """Spectral projections ``P1 ≤ P ≤ P2`` at the cut level with ``T̄(P) = target``.

    The boundary eigenspace ``Im(P2 − P1)`` is filled with eigenvectors in
    ascending index order of the fiber eigendecomposition (``fill_order``
    may also be ``"descending"`` or ``"random"``).
    """
    _require_hermitian(K)
    if lambda_field is None:
        lambda_field = lambda_cut(K, target)
    P1, P2, P, ranks = [], [], [], []
    exact = True
    for g, n in enumerate(K.grid.fiber_dims):
        s, u = K.eigh(g)
        level = lambda_field.fibers[g][0, 0].real
        m1, m2, m, ex = _sandwich_fiber(s, u, level, target, n, fill_order, rng)
        exact &= ex
        P1.append(_herm(u[:, m1] @ u[:, m1].conj().T))
        P2.append(_herm(u[:, m2] @ u[:, m2].conj().T))
        P.append(_herm(u[:, m] @ u[:, m].conj().T))
        ranks.append(int(m.sum()))
    if not exact:
        log.warning("target*n(γ) is not an integer on some fiber; nearest integer used")
    return Sandwich(_op_proj(K, P1), _op_proj(K, P2), _op_proj(K, P), tuple(ranks), exact)


class OperatorProjection:
    """A projection acting on the module (fiber matrices of operator size)."""

    __slots__ = ("grid", "length", "fibers")

    def __init__(self, grid, length, fibers):
        self.grid = grid
        self.length = length
        self.fibers = tuple(fibers)

    def ranks(self):
        return [int(round(np.trace(f).real)) for f in self.fibers]

    def center_trace(self):
        """``T̄(P)`` per fiber: rank over ``n(γ)``."""
        return np.array([r / n for r, n in zip(self.ranks(), self.grid.fiber_dims)])

    def __le__(self, other):
        return all(np.abs(a @ b - a).max() <= 1e-9 for a, b in zip(self.fibers, other.fibers))


def _op_proj(K, fibers):
    return OperatorProjection(K.grid, K.length, fibers)


def commutator_norm(K: ModuleOperator, P: OperatorProjection) -> float:
    return max(np.abs(k @ p - p @ k).max() for k, p in zip(K.fibers, P.fibers))


# ---------------------------------------------------------------------------
# eigenpairs
# ---------------------------------------------------------------------------

def _generator_from_columns(cols, n):
    """Pack orthonormal columns into a ``d × n`` generator, zero-padded."""
    d, r = cols.shape
    if r > n:
        raise RankError(f"range of rank {r} does not fit one generator of width {n}")
    x = np.zeros((d, n), dtype=complex)
    x[:, :r] = cols
    return x


def extract_eigenpair(K: ModuleOperator, P: OperatorProjection):
    """Generator ``x`` of ``Im P`` and its eigenvalue ``λ = ⟨x, Kx⟩``.

    When ``Im P(γ)`` has rank ``n(γ)`` the generator is a unit, ``⟨x,x⟩ = 1``;
    lower rank gives ``⟨x,x⟩`` a proper projection.  The columns are
    eigenvectors of ``K`` inside ``Im P`` in descending eigenvalue order.
    """
    _check_grid(K, P)
    xs, lams = [], []
    for g, n in enumerate(K.grid.fiber_dims):
        k = K.fibers[g]
        basis = range_basis(P.fibers[g], 0.5)
        s, w = np.linalg.eigh(_herm(basis.conj().T @ k @ basis))
        cols = basis @ w[:, ::-1]
        x = _generator_from_columns(cols, n)
        xs.append(x)
        lams.append(_herm(x.conj().T @ k @ x))
    return ModuleVector(K.grid, K.length, xs), AlgebraField(K.grid, lams)


@dataclass
class EigenTerm:
    """One eigenvector field with its algebra-valued eigenvalue."""

    x: ModuleVector
    lam: AlgebraField
    p: AlgebraField
    separation: np.ndarray
    """``d_i(γ)``, the cut level of the step that produced the term."""
    part: str = "+"
    residual: float = 0.0
    _spectra: tuple = field(default=None, init=False, repr=False, compare=False)

    def spectra(self):
        """Per fiber, eigenvalues of ``λ`` restricted to ``Im ⟨x,x⟩`` (descending)."""
        key = (id(self.lam), id(self.p))
        if self._spectra is None or self._spectra[0] != key:
            out = []
            for lam, p in zip(self.lam.fibers, self.p.fibers):
                v = range_basis(p, 0.5)
                out.append(np.linalg.eigvalsh(_herm(v.conj().T @ lam @ v))[::-1])
            self._spectra = (key, out)
        return list(self._spectra[1])


@dataclass
class Certificate:
    name: str
    value: float
    threshold: float
    passed: bool
    note: str = ""

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        extra = f"  ({self.note})" if self.note else ""
        return f"{status}  {self.name:<28s} {self.value:.3e}  (tol {self.threshold:.1e}){extra}"


@dataclass
class SpectralDecomposition:
    """Eigenvector fields, algebra-valued eigenvalues and their certificates."""

    operator: ModuleOperator
    terms: list
    target: float = 1.0
    exact: bool = True
    certificates: list = field(default_factory=list)

    def __len__(self):
        return len(self.terms)

    @property
    def eigenvalues(self):
        return [t.lam for t in self.terms]

    @property
    def vectors(self):
        return [t.x for t in self.terms]

    def all_passed(self) -> bool:
        return all(c.passed for c in self.certificates)

    def certificate(self, name):
        for c in self.certificates:
            if c.name == name:
                return c
        raise KeyError(name)

    def regauged(self, unitaries: Sequence[AlgebraField]) -> "SpectralDecomposition":
        """Replace ``x_i`` by ``x_i u_i``; eigenvalues become ``u_i* λ_i u_i``."""
        terms = []
        for t, u in zip(self.terms, unitaries):
            uh = u.adjoint()
            terms.append(
                EigenTerm(t.x * u, uh @ t.lam @ u, uh @ t.p @ u, t.separation, t.part, t.residual)
            )
        dec = SpectralDecomposition(self.operator, terms, self.target, self.exact)
        dec.certificates = certify(dec)
        return dec

    def report(self) -> str:
        lines = [f"terms: {len(self.terms)}   target: {self.target:g}   exact ranks: {self.exact}"]
        lines += [c.line() for c in self.certificates]
        return "\n".join(lines)


def _fiber_parts(K: ModuleOperator, split: bool):
    """Orthonormal bases of the positive, kernel and negative spectral subspaces."""
    parts = {"+": [], "0": [], "-": []}
    for g in range(len(K.grid)):
        s, u = K.eigh(g)
        if not split:
            parts["+"].append(u[:, ::-1])
            continue
        scale = ZERO_TOL
        parts["+"].append(u[:, s > scale][:, ::-1])
        parts["0"].append(u[:, np.abs(s) <= scale])
        parts["-"].append(u[:, s < -scale])
    return parts


def _run_part(K: ModuleOperator, bases, sign, target, max_terms, fill_order, rng):
    """Deflation loop on one spectral part, operator ``sign·K`` compressed to ``bases``."""
    grid = K.grid
    dims = grid.fiber_dims
    bases = list(bases)
    # eigenvalues of the compressed operator in the current basis, once known;
    # after a compression to eigenvector complements it is exactly diagonal
    known = [None] * len(bases)
    terms = []
    while any(b.shape[1] for b in bases) and (max_terms is None or len(terms) < max_terms):
        xs, lams, ps, seps = [], [], [], []
        for g, n in enumerate(dims):
            b = bases[g]
            k = sign * K.fibers[g]
            d = K.dim(g)
            if b.shape[1] == 0:
                xs.append(np.zeros((d, n), dtype=complex))
                lams.append(np.zeros((n, n), dtype=complex))
                ps.append(np.zeros((n, n), dtype=complex))
                seps.append(0.0)
                continue
            if known[g] is None:
                s, w = np.linalg.eigh(_herm(b.conj().T @ k @ b))
            else:
                s, w = known[g], None
            level = _cut_level(s[::-1], target, n)
            _, _, chosen, _ = _sandwich_fiber(s, w, level, target, n, fill_order, rng)
            sel = np.nonzero(chosen)[0][::-1]
            rest = np.nonzero(~chosen)[0]
            cols = b[:, sel] if w is None else b @ w[:, sel]
            x = _generator_from_columns(cols, n)
            xs.append(x)
            lams.append(_herm(x.conj().T @ (sign * k) @ x))
            ps.append(_herm(x.conj().T @ x))
            seps.append(sign * level)
            if not sel.size:
                raise RankError("deflation step captured nothing; target rank is zero")
            # explicit compression to the complement of Im P
            bases[g] = b[:, rest] if w is None else b @ w[:, rest]
            known[g] = s[rest]
        terms.append(
            EigenTerm(
                ModuleVector(grid, K.length, xs),
                AlgebraField(grid, lams),
                AlgebraField(grid, ps),
                np.array(seps),
                "+" if sign > 0 else "-",
            )
        )
    return terms


def _kernel_terms(K: ModuleOperator, bases, target):
    grid = K.grid
    terms = []
    bases = list(bases)
    while any(b.shape[1] for b in bases):
        xs, lams, ps = [], [], []
        for g, n in enumerate(grid.fiber_dims):
            b = bases[g]
            rank, _ = _target_rank(target, n, b.shape[1])
            x = _generator_from_columns(b[:, :rank], n)
            bases[g] = b[:, rank:]
            xs.append(x)
            lams.append(_herm(x.conj().T @ K.fibers[g] @ x))
            ps.append(_herm(x.conj().T @ x))
        terms.append(
            EigenTerm(
                ModuleVector(grid, K.length, xs),
                AlgebraField(grid, lams),
                AlgebraField(grid, ps),
                np.zeros(len(grid)),
                "0",
            )
        )
    return terms


def _align_gauge(term: EigenTerm):
    """Rotate each fiber's generator toward the previous fiber's (polar factor).

    Skipped where fiber shapes differ or the overlap is nearly singular.
    """
    xs = list(term.x.fibers)
    lams = list(term.lam.fibers)
    ps = list(term.p.fibers)
    for g in range(1, len(xs)):
        prev, cur = xs[g - 1], xs[g]
        if prev.shape != cur.shape:
            continue
        u, s, vh = np.linalg.svd(cur.conj().T @ prev)
        if s.size == 0 or s.min() < GAUGE_OVERLAP_MIN:
            continue
        r = u @ vh
        xs[g] = cur @ r
        lams[g] = _herm(r.conj().T @ lams[g] @ r)
        ps[g] = _herm(r.conj().T @ ps[g] @ r)
    grid = term.x.grid
    return EigenTerm(
        ModuleVector(grid, term.x.length, xs),
        AlgebraField(grid, lams),
        AlgebraField(grid, ps),
        term.separation,
        term.part,
        term.residual,
    )


def diagonalize(
    K: ModuleOperator,
    max_terms: int | None = None,
    target: float = 1.0,
    *,
    fill_order: str = "ascending",
    rng=None,
    gauge: bool = True,
    include_kernel: bool = True,
    residual_tol: float = RESIDUAL_TOL,
) -> SpectralDecomposition:
    """Operator-valued eigen-decomposition ``K x_i = x_i λ_i``.

    Positive definite operators are diagonalized directly.  Otherwise the
    fibers are split into positive, kernel and negative parts; terms come
    out ordered positive (descending), kernel, negative (descending), so
    ``λ_i ≥ λ_{i+1}`` holds throughout.  Generators of parts whose rank runs
    out on a fiber are zero there, with ``⟨x,x⟩(γ) = 0``.
    """
    _require_hermitian(K)
    if not target > 0:
        raise ValueError("target must be positive")
    budget = max(
        int(np.ceil(K.dim(g) / max(_target_rank(target, n, K.dim(g))[0], 1)))
        for g, n in enumerate(K.grid.fiber_dims)
    )
    if max_terms is not None and max_terms > budget:
        raise RankError(f"max_terms {max_terms} exceeds the rank budget {budget}")
    exact = all(_target_rank(target, n, K.dim(g))[1] for g, n in enumerate(K.grid.fiber_dims))
    split = K.min_eigenvalue() <= ZERO_TOL
    parts = _fiber_parts(K, split)
    terms = _run_part(K, parts["+"], 1.0, target, max_terms, fill_order, rng)
    if split:
        remaining = None if max_terms is None else max_terms - len(terms)
        if include_kernel and (remaining is None or remaining > 0):
            terms += _kernel_terms(K, parts["0"], target)[:remaining]
        remaining = None if max_terms is None else max_terms - len(terms)
        if remaining is None or remaining > 0:
            neg = _run_part(K, parts["-"], -1.0, target, None, fill_order, rng)
            # most negative first from the -K run: reverse, zero fillers move to the front
            neg = neg[::-1]
            terms += neg[:remaining]
    if gauge:
        terms = [_align_gauge(t) for t in terms]
    for t, r in zip(terms, _residuals(K, terms)):
        t.residual = r
    dec = SpectralDecomposition(K, terms, target, exact)
    dec.certificates = certify(dec, residual_tol)
    return dec


def _residual(K, term: EigenTerm) -> float:
    return max(
        np.linalg.norm(k @ x - x @ lam, 2) if x.size else 0.0
        for k, x, lam in zip(K.fibers, term.x.fibers, term.lam.fibers)
    )


def _residuals(K, terms) -> list:
    """``_residual`` for every term, batched over terms within each fiber."""
    out = np.zeros(len(terms))
    if not terms:
        return []
    for g, k in enumerate(K.fibers):
        X = np.stack([t.x.fibers[g] for t in terms])
        if not X.size:
            continue
        L = np.stack([t.lam.fibers[g] for t in terms])
        out = np.maximum(out, np.linalg.norm(k @ X - X @ L, 2, axis=(1, 2)))
    return [float(v) for v in out]


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------

def certify(dec: SpectralDecomposition, residual_tol: float = RESIDUAL_TOL) -> list:
    terms = dec.terms
    certs = []
    ortho = 0.0
    for g in range(len(dec.operator.grid) if terms else 0):
        X = np.concatenate([t.x.fibers[g] for t in terms], axis=1)
        if not X.size:
            continue
        gram = X.conj().T @ X
        n = terms[0].x.fibers[g].shape[1]
        for i, t in enumerate(terms):
            gram[i * n:(i + 1) * n, i * n:(i + 1) * n] -= t.p.fibers[g]
        ortho = max(ortho, float(np.abs(gram).max()))
    proj = max(
        (np.abs(p @ p - p).max() for t in terms for p in t.p.fibers if p.size), default=0.0
    )
    certs.append(Certificate("orthonormality", ortho, ORTHONORMALITY_TOL, ortho <= ORTHONORMALITY_TOL))
    certs.append(Certificate("inner-square projection", proj, ORTHONORMALITY_TOL, proj <= ORTHONORMALITY_TOL))
    res = max((t.residual for t in terms), default=0.0)
    certs.append(Certificate("residual", res, residual_tol, res <= residual_tol))

    order = 0.0
    sep = 0.0
    spectra = [t.spectra() for t in terms]
    for i in range(len(terms) - 1):
        for g in range(len(dec.operator.grid)):
            diff = terms[i].lam.fibers[g] - terms[i + 1].lam.fibers[g]
            if diff.size:
                order = max(order, -np.linalg.eigvalsh(_herm(diff))[0])
            a, b = spectra[i][g], spectra[i + 1][g]
            if a.size and b.size:
                sep = max(sep, b.max() - a.min())
    certs.append(Certificate("operator ordering", max(order, 0.0), ORDERING_TOL, order <= ORDERING_TOL))
    certs.append(
        Certificate(
            "spectral separation",
            max(sep, 0.0),
            ORDERING_TOL,
            sep <= ORDERING_TOL,
            "min Sp λ_i ≥ max Sp λ_{i+1}",
        )
    )
    # each eigenvalue spectrum bracketed by its recorded cut level, positive part only
    bracket = 0.0
    pos = [i for i, t in enumerate(terms) if t.part == "+"]
    for i in pos:
        for g in range(len(dec.operator.grid)):
            d = terms[i].separation[g]
            a = spectra[i][g]
            if a.size:
                bracket = max(bracket, d - a.min())
            if i + 1 < len(terms) and spectra[i + 1][g].size:
                bracket = max(bracket, spectra[i + 1][g].max() - d)
    certs.append(Certificate("separation scalars", max(bracket, 0.0), ORDERING_TOL, bracket <= ORDERING_TOL))
    certs.append(
        Certificate(
            "exact rank target",
            0.0 if dec.exact else 1.0,
            0.5,
            dec.exact,
            "" if dec.exact else "target·n(γ) not an integer; nearest integer used",
        )
    )
    # λ vanishes off Im ⟨x,x⟩, so its norm is read off the restricted spectra
    norms = np.array([max((float(np.abs(a).max()) for a in spectra[i] if a.size), default=0.0) for i in pos])
    growth = float(np.max(np.diff(norms))) if len(norms) > 1 else 0.0
    certs.append(
        Certificate(
            "eigenvalue norm decay",
            max(growth, 0.0),
            ORDERING_TOL,
            growth <= ORDERING_TOL,
            f"last ‖λ_i‖ = {norms[-1]:.3e}" if len(norms) else "",
        )
    )
    return certs


# ---------------------------------------------------------------------------
# sign split, uniqueness comparison, compactness
# ---------------------------------------------------------------------------

def sign_split(K: ModuleOperator, tol: float = ZERO_TOL):
    """Spectral projections onto the positive, kernel and negative parts."""
    _require_hermitian(K)
    plus, zero, minus = [], [], []
    for g in range(len(K.grid)):
        s, u = K.eigh(g)
        for out, mask in ((plus, s > tol), (zero, np.abs(s) <= tol), (minus, s < -tol)):
            v = u[:, mask]
            out.append(_herm(v @ v.conj().T))
    return _op_proj(K, plus), _op_proj(K, zero), _op_proj(K, minus)


@dataclass(frozen=True)
class Comparison:
    passed: bool
    max_deviation: float
    location: tuple | None = None
    refused: str | None = None

    def __str__(self):
        if self.refused:
            return f"REFUSED: {self.refused}"
        where = "" if self.location is None else f" at term {self.location[0]}, point {self.location[1]}"
        return f"{'PASS' if self.passed else 'FAIL'}: max sorted-spectrum deviation {self.max_deviation:.3e}{where}"


def _separated(dec: SpectralDecomposition, tol=ORDERING_TOL) -> bool:
    spectra = [t.spectra() for t in dec.terms]
    for i in range(len(spectra) - 1):
        for a, b in zip(spectra[i], spectra[i + 1]):
            if a.size and b.size and b.max() > a.min() + tol:
                return False
    return True


def compare_ordered(dec1: SpectralDecomposition, dec2: SpectralDecomposition, tol: float = COMPARE_TOL) -> Comparison:
    """Check that two ordered decompositions have unitarily equivalent eigenvalues.

    Both must satisfy ``min Sp λ_i(γ) ≥ max Sp λ_{i+1}(γ)``; otherwise the
    uniqueness statement does not apply and the comparison is refused.
    Unitary equivalence of Hermitian matrices is tested through sorted spectra.
    """
    for name, dec in (("first", dec1), ("second", dec2)):
        if not _separated(dec):
            return Comparison(False, np.inf, refused=f"{name} decomposition is not spectrally separated")
    if dec1.operator.grid != dec2.operator.grid:
        return Comparison(False, np.inf, refused="decompositions live on different grids")
    if len(dec1) != len(dec2):
        return Comparison(False, np.inf, location=(min(len(dec1), len(dec2)), None))
    worst, where = 0.0, None
    for i, (t1, t2) in enumerate(zip(dec1.terms, dec2.terms)):
        for g, (a, b) in enumerate(zip(t1.spectra(), t2.spectra())):
            if a.shape != b.shape:
                return Comparison(False, np.inf, location=(i, g))
            dev = np.abs(np.sort(a) - np.sort(b)).max() if a.size else 0.0
            if dev > worst:
                worst, where = dev, (i, g)
    passed = worst <= tol
    return Comparison(passed, worst, None if passed else where)


def compactness_profile(K: ModuleOperator) -> np.ndarray:
    """Norms ``c_n`` of the restriction of ``K`` to coordinates beyond ``n``, ``n = 0 … N``."""
    N = K.length
    out = np.zeros(N + 1)
    for g in range(len(K.grid)):
        r = K.rows(g)
        k = K.fibers[g]
        for n in range(N):
            out[n] = max(out[n], np.linalg.norm(k[:, n * r:], 2))
    return out
