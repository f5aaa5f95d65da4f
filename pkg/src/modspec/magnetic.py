"""Magnetic Schrödinger operator ``D = Δ + W`` on a rational rotation module.

Model
-----
At rational ``θ = p/q`` the operator acts on ``L²(ℝ_t) ⊗ ℂ^p`` for every
Bloch phase pair ``β = (β1, β2)``:

* ``Δ`` is diagonal in the oscillator basis ``φ_i(t) = σ^{-1/2} ψ_{i-1}(t/σ)``
  with eigenvalues ``(2i−1)θ`` and ``σ² = θ/(2π)``;
* ``W = Σ w_kl B_kl``, ``B_kl = T_t^k E_t^l ⊗ T_s^{-k} E_s^l`` where ``T`` is
  the unit translation and ``E`` multiplication by ``e^{2πi·/θ}``;
* on the ``s`` factor, ``T_s ↦ e^{iβ1/p} S`` and ``E_s ↦ e^{iβ2/p} C`` with
  ``(S f)_j = f_{j+1 mod p}``, ``C = diag(ω^j)``, ``ω = e^{2πi/θ}``, so that
  ``SC = ωCS`` as for the continuum operators.

The Bloch torus carries the algebra fiber ``M_q``; a module vector over one
Bloch point is a ``(M·p) × q`` matrix, and a band projection has rank ``p``
there, i.e. centre-valued trace ``p/q = θ``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

import numpy as np

from .algebra import AlgebraField, ParameterGrid, _herm
from .diagonalizer import EigenTerm, ModuleOperator, diagonalize
from .errors import GapHypothesisError, NotHermitianError, QOverflowError, QuadratureError
from .kernels import hermite_table
from .parallel import pmap

log = logging.getLogger(__name__)

Q_MAX = 64
RATIONAL_TOL = 1e-9
COEFF_HERMITIAN_TOL = 1e-12
W_HERMITIAN_TOL = 1e-9
QUAD_TOL = 1e-13
QUAD_ORDER = 24
QUAD_MAX_DOUBLINGS = 8
UNITARITY_TOL = 1e-8


# ---------------------------------------------------------------------------
# rational approximation
# ---------------------------------------------------------------------------

def convergents(theta: float, limit: int = 64):
    """Continued-fraction convergents ``p/q`` of ``theta`` (exact arithmetic)."""
    x = Fraction(theta)
    p0, q0, p1, q1 = 0, 1, 1, 0
    for _ in range(limit):
        a = math.floor(x)
        p0, q0, p1, q1 = p1, q1, a * p1 + p0, a * q1 + q0
        yield p1, q1
        frac = x - a
        if frac == 0:
            return
        x = 1 / frac


def rationalize(theta: float, q_max: int = Q_MAX, tol: float = RATIONAL_TOL) -> tuple[int, int]:
    """First convergent ``p/q`` with ``|θ − p/q| ≤ tol``; ``q ≤ q_max`` required.

    Convergents always satisfy ``|θ − p/q| ≤ 1/q²``.
    """
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    best = None
    for p, q in convergents(theta):
        if q > q_max:
            break
        if p == 0:  # θ_eff = 0 is not a rotation algebra
            continue
        best = (p, q)
        if abs(theta - p / q) <= tol:
            return p, q
    raise QOverflowError(
        f"no convergent of {theta!r} within {tol:g} has denominator ≤ {q_max}", theta, best
    )


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------

def _bloch_grid(points: int, q: int) -> ParameterGrid:
    phases = 2 * np.pi * np.arange(points) / points
    pts = [(b1, b2) for b1 in phases for b2 in phases]
    return ParameterGrid(np.full(len(pts), 1.0 / len(pts)), [q] * len(pts), pts)


@dataclass
class MagneticModel:
    """Rational-θ truncation of ``D = Δ + W``.

    Parameters
    ----------
    theta : float
        Rotation parameter in (0, 1); replaced internally by its convergent
        ``p/q`` (``theta_eff``).
    osc_dim : int
        Number of oscillator basis functions ``M_osc``.
    coeffs : mapping
        Fourier coefficients ``(k, l) → w_kl``; must satisfy
        ``w_{-k,-l} = conj(w_kl)``.
    bloch_points : int
        Phases per torus direction; the Bloch grid has ``bloch_points²`` points.
    """

    theta: float
    osc_dim: int = 64
    coeffs: Mapping[tuple, complex] = field(default_factory=dict)
    bloch_points: int = 3
    q_max: int = Q_MAX
    rational_tol: float = RATIONAL_TOL

    def __post_init__(self):
        if self.osc_dim < 1:
            raise ValueError("osc_dim must be at least 1")
        self.coeffs = {(int(k), int(l)): complex(w) for (k, l), w in self.coeffs.items()}
        for (k, l), w in self.coeffs.items():
            partner = self.coeffs.get((-k, -l), 0.0)
            if abs(partner - np.conj(w)) > COEFF_HERMITIAN_TOL * max(1.0, abs(w)):
                raise NotHermitianError(f"w[{-k},{-l}] != conj(w[{k},{l}]): W would not be real")
        self.p, self.q = rationalize(self.theta, self.q_max, self.rational_tol)
        self.grid = _bloch_grid(self.bloch_points, self.q)
        self._alpha = {}

    def with_theta(self, theta: float) -> "MagneticModel":
        return MagneticModel(theta, self.osc_dim, self.coeffs, self.bloch_points, self.q_max, self.rational_tol)

    @property
    def theta_eff(self) -> float:
        return self.p / self.q

    @property
    def sigma(self) -> float:
        """Oscillator width: ``σ² = θ/(2π)``."""
        return math.sqrt(self.theta_eff / (2 * math.pi))

    @property
    def coeff_l1(self) -> float:
        """``Σ |w_kl|``, the bound on ``‖W‖``."""
        return float(sum(abs(w) for w in self.coeffs.values()))

    @property
    def trust_ceiling(self) -> float:
        """Half the top Δ eigenvalue; eigenvalues below it are trusted."""
        return self.osc_dim * self.theta_eff

    def delta_eigenvalues(self) -> np.ndarray:
        return (2 * np.arange(1, self.osc_dim + 1) - 1) * self.theta_eff


# ---------------------------------------------------------------------------
# Δ and translation matrices
# ---------------------------------------------------------------------------

def build_delta(model: MagneticModel) -> ModuleOperator:
    """``Δ = diag((2i−1)θ) ⊗ 1_p`` on every Bloch fiber."""
    d = np.kron(np.diag(model.delta_eigenvalues()), np.eye(model.p))
    return ModuleOperator(model.grid, model.osc_dim, [d] * len(model.grid))


@dataclass(frozen=True)
class TranslationMatrix:
    """Coefficients ``α_ij`` of ``T_t^k E_t^l φ_i = Σ_j α_ij φ_j``."""

    alpha: np.ndarray
    k: int
    l: int
    quadrature_error: float
    nodes: int

    @property
    def operator(self) -> np.ndarray:
        """Matrix of the truncated operator in the oscillator basis (``α^T``)."""
        return self.alpha.T

    def unitarity_defect(self, rows: int | None = None) -> float:
        """``max |Σ_j conj(α_ij) α_nj − δ_in|`` over ``i, n < rows`` (default half the basis)."""
        m = self.alpha.shape[0]
        rows = max(m // 2, 1) if rows is None else rows
        a = self.alpha[:rows]
        return float(np.abs(a.conj() @ a.T - np.eye(rows)).max())


def _gauss_legendre_panels(lo, hi, panels, order=QUAD_ORDER):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _alpha_on_nodes(model, k, l, nodes, weights):
    sig = model.sigma
    M = model.osc_dim
    scale = sig ** -0.5
    phi = hermite_table(nodes / sig, M) * scale
    phik = hermite_table((nodes + k) / sig, M) * scale
    phase = np.exp(2j * np.pi * l * (nodes + k) / model.theta_eff)
    # α_ij = ∫ φ_j(t) e^{2πil(t+k)/θ} φ_i(t+k) dt
    return (phik * (phase * weights)) @ phi.T


def translation_matrix(model: MagneticModel, k: int, l: int) -> TranslationMatrix:
    """α for ``(k, l)`` by adaptive composite Gauss–Legendre quadrature.

    The window is ``±(|k| + 8σ√M)`` and starts with at least ``4M`` nodes;
    the panel count doubles until two successive results agree to
    ``QUAD_TOL``.  Non-convergence raises :class:`QuadratureError`.
    """
    key = (int(k), int(l))
    if key in model._alpha:
        return model._alpha[key]
    M = model.osc_dim
    half = abs(k) + 8 * model.sigma * math.sqrt(M)
    panels = max(1, math.ceil(4 * M / QUAD_ORDER))
    nodes, weights = _gauss_legendre_panels(-half, half, panels)
    prev = _alpha_on_nodes(model, k, l, nodes, weights)
    err = np.inf
    for _ in range(QUAD_MAX_DOUBLINGS):
        panels *= 2
        nodes, weights = _gauss_legendre_panels(-half, half, panels)
        cur = _alpha_on_nodes(model, k, l, nodes, weights)
        err = float(np.abs(cur - prev).max())
        prev = cur
        if err <= QUAD_TOL:
            break
    else:
        raise QuadratureError(f"quadrature for (k,l)=({k},{l}) did not converge", err)
    tm = TranslationMatrix(prev, int(k), int(l), err, nodes.size)
    model._alpha[key] = tm
    return tm


def clock_shift(model: MagneticModel, k: int, l: int, bloch) -> np.ndarray:
    """``C_kl(β) = (e^{iβ1/p} S)^{-k} (e^{iβ2/p} C)^l`` on the ``p``-point lattice."""
    p = model.p
    b1, b2 = bloch
    j = np.arange(p)
    shift = np.roll(np.eye(p), 1, axis=1)  # (S f)_j = f_{j+1}
    Sk = np.linalg.matrix_power(shift.T, k) if k >= 0 else np.linalg.matrix_power(shift, -k)
    omega_l = np.exp(2j * np.pi * l * j / model.theta_eff)
    phase = np.exp(-1j * k * b1 / p + 1j * l * b2 / p)
    return phase * (Sk * omega_l[None, :])


def build_perturbation(model: MagneticModel) -> ModuleOperator:
    """``W = Σ w_kl (α_kl)^T ⊗ C_kl(β)`` on every Bloch fiber."""
    M, p = model.osc_dim, model.p
    mats = {kl: translation_matrix(model, *kl).operator for kl, w in model.coeffs.items() if w != 0}

    def fiber(bloch):
        out = np.zeros((M * p, M * p), dtype=complex)
        for (k, l), a in mats.items():
            out += model.coeffs[(k, l)] * np.kron(a, clock_shift(model, k, l, bloch))
        defect = np.abs(out - out.conj().T).max() if out.size else 0.0
        if defect > W_HERMITIAN_TOL:
            raise NotHermitianError(f"assembled W has Hermitian defect {defect:.3e}")
        return _herm(out)

    return ModuleOperator(model.grid, M, pmap(fiber, model.grid.points))


def build_operator(model: MagneticModel) -> tuple[ModuleOperator, ModuleOperator]:
    """``(D, W)`` with ``D = Δ + W``."""
    delta = build_delta(model)
    W = build_perturbation(model)
    D = ModuleOperator(model.grid, model.osc_dim, [a + b for a, b in zip(delta.fibers, W.fibers)])
    return D, W


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    theta: float
    bloch1: float
    bloch2: float
    eigenvalue: float
    trusted: bool


@dataclass
class GapCheck:
    """Per-θ summary of the gap claim ``Sp D ⊂ ∪ᵢ (2θ(i−1), 2θi)`` when ``‖W‖ < θ``."""

    theta: float
    p: int
    q: int
    w_norm: float
    coeff_l1: float
    hypothesis: bool
    inclusion: bool
    min_boundary_distance: float

    @property
    def status(self) -> str:
        if not self.hypothesis:
            return "NOT-APPLICABLE"
        return "PASS" if self.inclusion else "FAIL"

    def line(self) -> str:
        return (
            f"theta={self.theta:.12g} p/q={self.p}/{self.q} ||W||={self.w_norm:.6e} "
            f"sum|w|={self.coeff_l1:.6e} hypothesis={'yes' if self.hypothesis else 'no'} "
            f"min_gap_distance={self.min_boundary_distance:.6e} {self.status}"
        )


@dataclass
class SweepResult:
    rows: list
    checks: list
    skipped: list
    """``(theta, message)`` for every θ dropped on q overflow."""


def boundary_distance(eigs, theta) -> float:
    """Smallest distance from ``eigs`` to the band edges ``2θi`` (negative if on an edge)."""
    eigs = np.asarray(eigs, dtype=float)
    if eigs.size == 0:
        return np.inf
    r = np.mod(eigs, 2 * theta)
    d = np.minimum(r, 2 * theta - r)
    return float(d.min())


def fiber_spectra(model: MagneticModel):
    """``(D, W, spectra)`` with ascending eigenvalues of ``D`` per Bloch point."""
    D, W = build_operator(model)
    spectra = pmap(lambda g: D.spectrum(g), range(len(model.grid)))
    return D, W, spectra


def gap_check(model: MagneticModel, W: ModuleOperator, spectra) -> GapCheck:
    th = model.theta_eff
    w_norm = W.norm()
    trusted = np.concatenate([s[s < model.trust_ceiling] for s in spectra])
    dist = boundary_distance(trusted, th)
    inside = bool(np.all(trusted > 0)) and dist > 0
    return GapCheck(th, model.p, model.q, w_norm, model.coeff_l1, w_norm < th, inside, dist)


def spectrum_sweep(model: MagneticModel, theta_list) -> SweepResult:
    """Eigenvalues of ``D`` for every θ (rebuilt at its own ``p/q``) and Bloch point."""
    rows, checks, skipped = [], [], []
    for theta in theta_list:
        try:
            m = model.with_theta(float(theta))
        except QOverflowError as exc:
            msg = f"skipped theta={theta!r}: {exc}"
            log.warning(msg)
            skipped.append((float(theta), msg))
            continue
        _, W, spectra = fiber_spectra(m)
        for (b1, b2), s in zip(m.grid.points, spectra):
            for e in s:
                rows.append(SweepRow(m.theta_eff, b1, b2, float(e), bool(e < m.trust_ceiling)))
        checks.append(gap_check(m, W, spectra))
    return SweepResult(rows, checks, skipped)


@dataclass
class Band:
    """Operator eigenvalue of one band over the Bloch torus."""

    index: int
    term: EigenTerm
    lam: AlgebraField
    residual: float
    spectra: list
    """Per Bloch point, eigenvalues of ``λ`` on ``Im ⟨x,x⟩`` (ascending)."""


def band_eigenvalues(model: MagneticModel, band_index: int) -> Band:
    """Band-``i`` eigenvalue ``λ_i ∈ A`` with ``⟨x_i,x_i⟩`` of trace ``θ``.

    The diagonalizer runs on the resolvent ``D^{-1}`` with target ``p/q``,
    so step ``i`` captures exactly the ``p`` eigenvalues of band ``i`` per
    Bloch point; ``λ_i = ⟨x_i, D x_i⟩``.  Refused unless ``‖W‖ < θ`` and the
    measured bands do not overlap.
    """
    if band_index < 1 or band_index > model.osc_dim:
        raise ValueError("band index out of range")
    th = model.theta_eff
    D, W, spectra = fiber_spectra(model)
    w_norm = W.norm()
    if w_norm >= th:
        raise GapHypothesisError(f"‖W‖ = {w_norm:.6g} is not below θ = {th:.6g}", w_norm)
    p = model.p
    for s in spectra:
        lo, hi = s[(band_index - 1) * p:band_index * p], s[band_index * p:(band_index + 1) * p]
        if hi.size and lo.max() >= hi.min():
            raise GapHypothesisError("measured bands overlap", float(lo.max() - hi.min()))
    R = ModuleOperator(model.grid, model.osc_dim, [_herm(np.linalg.inv(f)) for f in D.fibers])
    dec = diagonalize(R, max_terms=band_index, target=p / model.q, gauge=True)
    term = dec.terms[band_index - 1]
    lam = AlgebraField(
        model.grid, [_herm(x.conj().T @ d @ x) for x, d in zip(term.x.fibers, D.fibers)]
    )
    res = max(
        np.linalg.norm(d @ x - x @ l, 2) for d, x, l in zip(D.fibers, term.x.fibers, lam.fibers)
    )
    t = EigenTerm(term.x, lam, term.p, term.separation, term.part, res)
    return Band(band_index, t, lam, res, [s[::-1] for s in t.spectra()])
