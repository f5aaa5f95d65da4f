import numpy as np
import pytest

from modspec.algebra import trace_tau
from modspec.errors import GapHypothesisError, NotHermitianError, QOverflowError
from modspec.magnetic import (
    MagneticModel,
    band_eigenvalues,
    boundary_distance,
    build_delta,
    build_operator,
    build_perturbation,
    clock_shift,
    convergents,
    fiber_spectra,
    gap_check,
    rationalize,
    spectrum_sweep,
    translation_matrix,
)
from oracles import displacement_elements

THETAS = (1 / 3, 2 / 5, 3 / 8, 5 / 13)


def random_coeffs(rng, total, kmax=2):
    """Hermitian-symmetric coefficients with ``Σ|w| = total``."""
    pairs = [(k, l) for k in range(-kmax, kmax + 1) for l in range(-kmax, kmax + 1) if (k, l) > (0, 0)]
    chosen = [pairs[i] for i in rng.choice(len(pairs), 3, replace=False)]
    raw = {}
    for kl in chosen:
        raw[kl] = rng.standard_normal() + 1j * rng.standard_normal()
    if rng.random() < 0.5:
        raw[(0, 0)] = rng.standard_normal()
    coeffs = {}
    for (k, l), w in raw.items():
        coeffs[(k, l)] = w
        coeffs[(-k, -l)] = np.conj(w)
    s = sum(abs(w) for w in coeffs.values())
    return {kl: w * total / s for kl, w in coeffs.items()}


# -- rationalization ----------------------------------------------------------------------

def test_convergents_exact():
    assert list(convergents(3 / 8))[-1] == (3, 8)
    assert rationalize(0.5) == (1, 2)
    assert rationalize(5 / 13) == (5, 13)


def test_rationalize_quality():
    for theta in (0.1234, 0.61803398875, 0.3):
        p, q = rationalize(theta, q_max=10**6, tol=1e-7)
        assert abs(theta - p / q) <= 1 / q**2
        assert abs(theta - p / q) <= 1e-7


def test_rationalize_overflow():
    with pytest.raises(QOverflowError) as info:
        rationalize(0.61803398875, q_max=64)
    assert info.value.best is not None and info.value.best[1] <= 64
    with pytest.raises(ValueError):
        rationalize(1.5)


def test_model_rejects_non_hermitian_coeffs():
    with pytest.raises(NotHermitianError):
        MagneticModel(0.5, 8, {(1, 0): 0.1})


# -- Δ ----------------------------------------------------------------------------------------

def test_delta_examples():
    m = MagneticModel(0.5, 6)
    ev = m.delta_eigenvalues()
    assert ev[0] == pytest.approx(0.5)
    assert ev[2] == pytest.approx(2.5)
    assert np.allclose(np.diff(ev), 1.0)
    D = build_delta(MagneticModel(2 / 5, 5, bloch_points=2))
    assert D.fibers[0].shape == (10, 10)
    assert np.allclose(np.diag(D.fibers[0])[::2], (2 * np.arange(1, 6) - 1) * 0.4)


# -- translation matrices -----------------------------------------------------------------

def test_translation_identity():
    tm = translation_matrix(MagneticModel(1 / 3, 16), 0, 0)
    assert np.abs(tm.alpha - np.eye(16)).max() <= 1e-12


@pytest.mark.parametrize("theta", [1 / 3, 3 / 8])
@pytest.mark.parametrize("kl", [(1, 0), (0, 1), (1, -1), (2, 1), (-3, 2)])
def test_translation_matches_closed_form(theta, kl):
    M = 24
    tm = translation_matrix(MagneticModel(theta, M), *kl)
    ref = displacement_elements(M, theta, *kl)
    assert np.abs(tm.operator - ref).max() <= 1e-10


@pytest.mark.xfail(strict=True, reason="displaced inner rows leak past the truncated basis; see decisions ledger")
def test_translation_inner_rows_normalized():
    m = MagneticModel(2 / 5, 48)
    tm = translation_matrix(m, 0, 1)
    rows = np.sum(np.abs(tm.alpha[:24]) ** 2, axis=1)
    assert np.abs(rows - 1).max() <= 1e-8


def test_translation_low_rows_normalized():
    # rows whose displaced state still fits in the basis are unit vectors
    m = MagneticModel(2 / 5, 48)
    tm = translation_matrix(m, 0, 1)
    rows = np.sum(np.abs(tm.alpha[:4]) ** 2, axis=1)
    assert np.abs(rows - 1).max() <= 1e-12
    # the leak is exactly the closed-form mass beyond the basis
    ref = displacement_elements(96, 2 / 5, 0, 1)
    leak = np.sum(np.abs(ref[48:, :24]) ** 2, axis=0)
    assert np.allclose(1 - np.sum(np.abs(tm.alpha[:24]) ** 2, axis=1), leak, atol=1e-9)


def test_translation_adjoint_up_to_phase():
    m = MagneticModel(3 / 8, 20)
    a = translation_matrix(m, 1, 2).operator
    b = translation_matrix(m, -1, -2).operator
    # inner block only: truncation spoils the edge
    blk = slice(0, 8)
    ratio = (b[blk, blk] / a.conj().T[blk, blk])[np.abs(a.conj().T[blk, blk]) > 1e-3]
    assert np.allclose(np.abs(ratio), 1, atol=1e-8)
    assert np.ptp(np.angle(ratio)) <= 1e-8


def test_clock_shift_commutation():
    m = MagneticModel(2 / 5, 4)
    S = clock_shift(m, 1, 0, (0.0, 0.0))
    C = clock_shift(m, 0, 1, (0.0, 0.0))
    omega = np.exp(2j * np.pi / m.theta_eff)
    # S^{-1} C = ω^{-1} C S^{-1}
    assert np.allclose(S @ C, C @ S / omega)


# -- perturbation -------------------------------------------------------------------------

def test_perturbation_zero():
    W = build_perturbation(MagneticModel(1 / 3, 8, bloch_points=2))
    assert W.norm() == 0


def test_perturbation_constant():
    m = MagneticModel(2 / 5, 8, {(0, 0): 0.3}, bloch_points=2)
    W = build_perturbation(m)
    for f in W.fibers:
        assert np.abs(f - 0.3 * np.eye(16)).max() <= 1e-12


def test_perturbation_norm_bound(rng):
    for theta in THETAS:
        m = MagneticModel(theta, 24, random_coeffs(rng, 0.3), bloch_points=2)
        W = build_perturbation(m)
        assert W.is_hermitian(1e-9)
        assert W.norm() <= 0.3 + 1e-8


# -- spectra ------------------------------------------------------------------------------------

def test_zero_perturbation_spectrum():
    m = MagneticModel(3 / 8, 12, bloch_points=2)
    _, _, spectra = fiber_spectra(m)
    ref = np.repeat(m.delta_eigenvalues(), m.p)
    for s in spectra:
        assert np.abs(s - ref).max() <= 1e-10


def test_gap_inclusion_small_w(rng):
    for theta in THETAS:
        m = MagneticModel(theta, 32, random_coeffs(rng, 0.8 * theta), bloch_points=2)
        _, W, spectra = fiber_spectra(m)
        chk = gap_check(m, W, spectra)
        assert chk.hypothesis and chk.status == "PASS"
        assert chk.min_boundary_distance >= theta - chk.w_norm - 1e-6


def test_gap_not_applicable_large_w(rng):
    m = MagneticModel(1 / 3, 16, random_coeffs(rng, 3.0), bloch_points=2)
    _, W, spectra = fiber_spectra(m)
    chk = gap_check(m, W, spectra)
    if W.norm() >= m.theta_eff:
        assert chk.status == "NOT-APPLICABLE"


def test_boundary_distance():
    assert boundary_distance([0.5, 1.5], 0.5) == pytest.approx(0.5)
    assert boundary_distance([1.0], 0.5) == pytest.approx(0.0)


def test_sweep_rows_and_skip():
    base = MagneticModel(0.5, 6, bloch_points=2, q_max=8)
    res = spectrum_sweep(base, [1 / 3, 0.61803398875, 0.5])
    assert len(res.skipped) == 1 and "skipped" in res.skipped[0][1]
    assert [c.theta for c in res.checks] == pytest.approx([1 / 3, 0.5])
    assert all(c.status == "PASS" for c in res.checks)
    thetas = sorted({r.theta for r in res.rows})
    assert thetas == pytest.approx([1 / 3, 0.5])
    for r in res.rows:
        i = round((r.eigenvalue / r.theta + 1) / 2)
        assert r.eigenvalue == pytest.approx((2 * i - 1) * r.theta, abs=1e-10)
        assert r.trusted == (r.eigenvalue < 6 * r.theta)


def test_sweep_deterministic(rng):
    base = MagneticModel(0.5, 10, random_coeffs(rng, 0.1), bloch_points=2)
    a = spectrum_sweep(base, [1 / 3, 2 / 5])
    b = spectrum_sweep(base, [1 / 3, 2 / 5])
    assert a.rows == b.rows


# -- band eigenvalues ---------------------------------------------------------------------------

def test_band_flat_zero_w():
    m = MagneticModel(2 / 5, 10, bloch_points=2)
    band = band_eigenvalues(m, 1)
    for s in band.spectra:
        assert np.allclose(s, 0.4, atol=1e-10)
    assert np.allclose(trace_tau(band.term.p).real, 0.4)
    assert band.residual <= 1e-7


@pytest.mark.parametrize("index", [1, 2])
def test_band_matches_sweep_envelope(rng, index):
    theta = 3 / 8
    m = MagneticModel(theta, 24, random_coeffs(rng, 0.5 * theta), bloch_points=2)
    band = band_eigenvalues(m, index)
    _, _, spectra = fiber_spectra(m)
    p = m.p
    for s_band, s in zip(band.spectra, spectra):
        ref = s[(index - 1) * p:index * p]
        assert np.abs(np.sort(s_band) - ref).max() <= 1e-7
        assert np.all((s_band > 2 * theta * (index - 1)) & (s_band < 2 * theta * index))
    assert band.residual <= 1e-7
    assert trace_tau(band.term.p).real == pytest.approx(theta, abs=1e-12)


def test_band_refused_without_gap(rng):
    m = MagneticModel(1 / 3, 16, {(0, 0): 0.5}, bloch_points=2)
    with pytest.raises(GapHypothesisError):
        band_eigenvalues(m, 1)


def test_operator_hermitian(rng):
    m = MagneticModel(5 / 13, 16, random_coeffs(rng, 0.2), bloch_points=2)
    D, _ = build_operator(m)
    assert D.hermitian_defect() <= 1e-9


def test_rationalize_never_zero():
    p, q = rationalize(0.02, tol=0.05)
    assert p >= 1 and abs(0.02 - p / q) <= 0.05
