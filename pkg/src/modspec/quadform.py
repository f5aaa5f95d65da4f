"""Quadratic forms ``Q(x) = τ(⟨Dx, x⟩)`` on the unit ball of the module.

The maximizer is found by projected ascent: a step ``x ← x + Dx/‖D‖``
followed by the ball projection ``x ← x·f(⟨x,x⟩)`` with
``f(t) = min(1, t^{-1/2})``.  For positive ``D`` each step is one sweep of
orthogonal iteration with ``1 + D/‖D‖``, so ``Q`` never decreases and the
iterate converges to the top invariant subspace of every fiber.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algebra import AlgebraField, _herm, trace_tau
from .diagonalizer import ModuleOperator, _require_hermitian, diagonalize
from .errors import GridMismatchError, HypothesisError
from .module import ModuleVector, inner

POSITIVITY_TOL = 1e-10
PROJECTION_TOL = 1e-6
INVARIANCE_TOL = 1e-6


class QuadraticForm:
    """``Q(x) = τ(⟨Dx, x⟩)`` for a self-adjoint module operator ``D``."""

    def __init__(self, D: ModuleOperator):
        _require_hermitian(D)
        self.D = D

    @property
    def grid(self):
        return self.D.grid

    def _check(self, x: ModuleVector):
        if x.grid != self.D.grid or x.length != self.D.length:
            raise GridMismatchError("vector and operator do not match")
        for f, k in zip(x.fibers, self.D.fibers):
            if f.shape[0] != k.shape[0]:
                raise GridMismatchError(f"vector fiber {f.shape} does not fit operator {k.shape}")

    def __call__(self, x: ModuleVector) -> float:
        return evaluate(self, x)

    def gradient(self, x: ModuleVector) -> ModuleVector:
        """Riesz representative ``2Dx`` of the derivative for ``⟨·,·⟩_τ = Re τ⟨·,·⟩``."""
        self._check(x)
        return self.D.apply(x) * 2.0

    def directional_derivative(self, x: ModuleVector, h: ModuleVector) -> float:
        """``dQ(x)[h] = 2 Re τ(⟨Dx, h⟩)``."""
        return float(trace_tau(inner(self.gradient(x), h)).real)

    def is_positive(self, tol=POSITIVITY_TOL) -> bool:
        return self.D.min_eigenvalue() > tol


def evaluate(form: QuadraticForm, x: ModuleVector) -> float:
    """Value ``τ(⟨Dx, x⟩)``; real because ``D`` is Hermitian."""
    form._check(x)
    return float(trace_tau(inner(form.D.apply(x), x)).real)


def ball_projection(x: ModuleVector) -> ModuleVector:
    """Map ``x`` into the unit ball by clipping the spectrum of ``⟨x,x⟩`` at 1."""
    out = []
    for f in x.fibers:
        s, u = np.linalg.eigh(_herm(f.conj().T @ f))
        scale = np.where(s > 1.0, 1.0 / np.sqrt(np.maximum(s, 1.0)), 1.0)
        out.append(f @ (u * scale) @ u.conj().T)
    return ModuleVector(x.grid, x.length, out)


def stationarity_residual(form: QuadraticForm, x: ModuleVector) -> float:
    """``‖Dx − x⟨x, Dx⟩‖``: zero exactly when ``Im x`` is D-invariant."""
    worst = 0.0
    for k, f in zip(form.D.fibers, x.fibers):
        dx = k @ f
        r = dx - f @ (f.conj().T @ dx)
        worst = max(worst, np.linalg.norm(r, 2) if r.size else 0.0)
    return worst


@dataclass
class Maximizer:
    x: ModuleVector
    value: float
    certified: bool
    iterations: int
    residual: float
    history: list = field(default_factory=list)

    def inner_square(self) -> AlgebraField:
        return inner(self.x, self.x)


def _start_vector(form: QuadraticForm, rng):
    fibers = []
    for k, n in zip(form.D.fibers, form.grid.fiber_dims):
        d = k.shape[0]
        z = rng.standard_normal((d, n)) + 1j * rng.standard_normal((d, n))
        q, _ = np.linalg.qr(z)
        fibers.append(q[:, :n])
    return ModuleVector(form.grid, form.D.length, fibers)


def maximize_on_ball(
    form: QuadraticForm,
    iters: int = 20000,
    tol: float = 1e-9,
    *,
    x0: ModuleVector | None = None,
    seed: int = 0,
) -> Maximizer:
    """Maximize ``Q`` over ``‖x‖ ≤ 1`` by projected ascent with step ``1/‖D‖``.

    Convergence is declared when the stationarity residual drops below
    ``tol``; maximizers are not unique under degeneracy, so only the value
    and the invariance of ``Im x`` are certified.  When the budget runs out
    the last iterate is returned with ``certified=False``.
    """
    if not form.is_positive():
        raise HypothesisError("maximization needs a positive kernel-free operator", form.D.min_eigenvalue())
    x = _start_vector(form, np.random.default_rng(seed)) if x0 is None else ball_projection(x0)
    form._check(x)
    step = 1.0 / form.D.norm()
    value = evaluate(form, x)
    history = [value]
    residual = stationarity_residual(form, x)
    it = 0
    while it < iters and residual > tol:
        it += 1
        x = ball_projection(x + form.D.apply(x) * step)
        value = evaluate(form, x)
        history.append(value)
        residual = stationarity_residual(form, x)
    return Maximizer(x, value, residual <= tol, it, residual, history)


@dataclass(frozen=True)
class InvarianceReport:
    passed: bool
    off_block: float
    off_block_adjoint: float
    tol: float

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status}: ‖(1−P)DP‖ = {self.off_block:.3e}, "
            f"‖PD(1−P)‖ = {self.off_block_adjoint:.3e} (tol {self.tol:.0e})"
        )


def verify_invariant_subspace(form: QuadraticForm, x_star: ModuleVector, tol: float = INVARIANCE_TOL) -> InvarianceReport:
    """Check that the submodule generated by ``x★`` and its complement are D-invariant."""
    form._check(x_star)
    p = inner(x_star, x_star)
    defect = max(np.abs(f @ f - f).max() for f in p.fibers)
    if defect > PROJECTION_TOL:
        raise HypothesisError("⟨x,x⟩ is not a projection; x is not a certified maximizer", defect)
    a = b = 0.0
    for k, f in zip(form.D.fibers, x_star.fibers):
        P = f @ f.conj().T
        Q = np.eye(P.shape[0]) - P
        a = max(a, np.linalg.norm(Q @ k @ P, 2))
        b = max(b, np.linalg.norm(P @ k @ Q, 2))
    return InvarianceReport(max(a, b) <= tol, a, b, tol)


@dataclass(frozen=True)
class KyFanValue:
    value: float
    separated: bool
    """Whether ``min Sp λ1 ≥ max Sp λ2`` held on every fiber."""

    def __float__(self):
        return self.value


def kyfan_value(form: QuadraticForm) -> KyFanValue:
    """``τ(λ1)`` from the operator-valued diagonalization of ``D``."""
    dec = diagonalize(form.D, max_terms=min(2, _budget(form.D)))
    lam1 = dec.terms[0].lam
    separated = True
    if len(dec) > 1:
        s1, s2 = dec.terms[0].spectra(), dec.terms[1].spectra()
        for a, b in zip(s1, s2):
            if a.size and b.size and b.max() > a.min() + 1e-8:
                separated = False
    return KyFanValue(float(trace_tau(lam1).real), separated)


def _budget(D: ModuleOperator) -> int:
    return min(D.dim(g) // n for g, n in enumerate(D.grid.fiber_dims))
