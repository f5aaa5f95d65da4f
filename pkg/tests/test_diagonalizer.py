import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_grid, random_hermitian, random_positive_operator, random_unitary
from modspec.algebra import AlgebraField, ParameterGrid
from modspec.diagonalizer import (
    ModuleOperator,
    commutator_norm,
    compactness_profile,
    compare_ordered,
    counting_function,
    diagonalize,
    extract_eigenpair,
    lambda_cut,
    sandwich_projections,
    sign_split,
)
from modspec.errors import NotHermitianError, RankError
from modspec.example35 import example35_operator, run_example35
from modspec.module import ModuleVector, inner
from oracles import dense_spectrum


def one_point(n=1):
    return ParameterGrid([1.0], [n])


def diag_op(values, n=1, length=None):
    """Single-fiber operator with the given spectrum, randomly rotated when n > 1."""
    values = np.asarray(values, dtype=float)
    length = len(values) // n if length is None else length
    return ModuleOperator(one_point(n), length, [np.diag(values)])


def rotated_op(rng, values, n):
    u = random_unitary(rng, len(values))
    return ModuleOperator(one_point(n), len(values) // n, [u @ np.diag(values) @ u.conj().T])


def union_spectrum(dec, g):
    return np.sort(np.concatenate([t.spectra()[g] for t in dec.terms]))


# -- operator type ----------------------------------------------------------------------

def test_operator_commutes_with_right_action(rng):
    grid = random_grid(rng, 3, 3)
    K = random_positive_operator(rng, grid, 3)
    x = ModuleVector(grid, 3, [rng.standard_normal((3 * n, n)) for n in grid.fiber_dims])
    a = AlgebraField(grid, [rng.standard_normal((n, n)) for n in grid.fiber_dims])
    assert (K.apply(x * a) - K.apply(x) * a).norm() <= 1e-9


def test_non_hermitian_rejected():
    K = ModuleOperator(one_point(), 2, [np.array([[1.0, 1.0], [0.0, 1.0]])])
    with pytest.raises(NotHermitianError):
        diagonalize(K)


# -- counting function and cut level -------------------------------------------------------

def test_counting_function_examples():
    K = diag_op([3, 2, 1])
    assert counting_function(K, 0, 1.5) == 2
    assert counting_function(K, 0, 3) == 0
    K2 = diag_op([4, 3, 2, 1], n=2)
    assert counting_function(K2, 0, 2.5) == 1
    with pytest.raises(ValueError):
        counting_function(K, 0, np.nan)


def test_counting_function_right_continuous_nonincreasing(rng):
    K = rotated_op(rng, [5, 3, 3, 1, 0.5, 0.2], 2)
    levels = np.linspace(0, 6, 121)
    vals = [counting_function(K, 0, t) for t in levels]
    assert np.all(np.diff(vals) <= 0)
    spec = K.spectrum(0)
    for s in spec:
        above = spec[spec > s]
        step = 0.5 * (above.min() - s) if above.size else 1.0
        assert counting_function(K, 0, s + step) == counting_function(K, 0, s)


def test_lambda_cut_examples():
    assert lambda_cut(diag_op([3, 2, 1]), 1).fibers[0][0, 0] == pytest.approx(2)
    assert lambda_cut(diag_op([4, 3, 2, 1], n=2), 1).fibers[0][0, 0] == pytest.approx(2)
    grid = ParameterGrid.uniform(3, 2)
    K = ModuleOperator(grid, 3, [2.5 * np.eye(6)] * 3)
    for t in (0.5, 1, 2):
        assert np.allclose([f[0, 0] for f in lambda_cut(K, t).fibers], 2.5)


def test_lambda_cut_monotone_in_target(rng):
    grid = random_grid(rng, 4, 3)
    K = random_positive_operator(rng, grid, 4)
    prev = None
    for t in (0.5, 1, 1.5, 2, 3):
        cur = np.array([f[0, 0].real for f in lambda_cut(K, t).fibers])
        if prev is not None:
            assert np.all(cur <= prev + 1e-15)
        prev = cur


# -- sandwich -----------------------------------------------------------------------------

def test_sandwich_simple():
    s = sandwich_projections(diag_op([3, 2, 1]), target=1)
    assert s.P1.ranks() == [1] and s.P2.ranks() == [2] and s.P.ranks() == [1]
    assert np.allclose(s.P.fibers[0], np.diag([1, 0, 0]))


def test_sandwich_degenerate_top():
    K = diag_op([3, 3, 1])
    lam = lambda_cut(K, 1)
    assert lam.fibers[0][0, 0] == pytest.approx(3)
    s = sandwich_projections(K, lam, 1)
    assert s.P1.ranks() == [0] and s.P2.ranks() == [2] and s.P.ranks() == [1]
    assert s.P <= s.P2


def test_sandwich_identity_full_target():
    grid = ParameterGrid.uniform(2, 2)
    K = ModuleOperator(grid, 3, [1.7 * np.eye(6)] * 2)
    s = sandwich_projections(K, target=3 * 1.0 * 2 / 2)  # target·n = N·n
    assert s.P1.ranks() == [0, 0] and s.P2.ranks() == [6, 6] and s.P.ranks() == [6, 6]


def test_sandwich_non_integer_target_flagged():
    K = diag_op([4, 3, 2, 1], n=2)
    s = sandwich_projections(K, target=1.2)
    assert not s.exact
    assert s.P.ranks() == [2]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_sandwich_properties(seed):
    rng = np.random.default_rng(seed)
    grid = random_grid(rng, int(rng.integers(1, 4)), 3)
    fibers = []
    for n in grid.fiber_dims:
        d = 3 * n
        vals = rng.choice([0.3, 1.0, 2.0, 2.0, 4.0], d)
        u = random_unitary(rng, d)
        fibers.append(u @ np.diag(vals) @ u.conj().T)
    K = ModuleOperator(grid, 3, fibers)
    s = sandwich_projections(K, target=1)
    assert s.P1 <= s.P and s.P <= s.P2
    assert np.all(s.P1.center_trace() <= 1 + 1e-12) and np.all(s.P2.center_trace() >= 1 - 1e-12)
    assert np.allclose(s.P.center_trace(), 1)
    for P in (s.P1, s.P2, s.P):
        assert commutator_norm(K, P) <= 1e-9


# -- eigenpairs -----------------------------------------------------------------------------

def test_extract_trivial():
    grid = one_point(2)
    lam0 = np.array([[2.0, 0.5], [0.5, 1.0]])
    K = ModuleOperator(grid, 1, [lam0])
    s = sandwich_projections(K, target=1)
    x, lam = extract_eigenpair(K, s.P)
    # x is a unitary column, λ unitarily equivalent to λ0
    assert inner(x, x).allclose(AlgebraField.identity(grid), 1e-12)
    assert np.allclose(np.sort(np.linalg.eigvalsh(lam.fibers[0])), np.linalg.eigvalsh(lam0))
    assert np.allclose(x.fibers[0] @ lam.fibers[0] @ x.fibers[0].conj().T, lam0)


def test_extract_scalar_top():
    K = diag_op([3, 1])
    s = sandwich_projections(K, target=1)
    x, lam = extract_eigenpair(K, s.P)
    assert np.allclose(np.abs(x.fibers[0]), [[1], [0]])
    assert lam.fibers[0][0, 0] == pytest.approx(3)


def test_extract_m2(rng):
    K = rotated_op(rng, [4, 3, 2, 1], 2)
    s = sandwich_projections(K, target=1)
    x, lam = extract_eigenpair(K, s.P)
    assert np.allclose(np.linalg.eigvalsh(lam.fibers[0]), [3, 4])
    assert np.linalg.norm(K.fibers[0] @ x.fibers[0] - x.fibers[0] @ lam.fibers[0], 2) <= 1e-7


# -- full runs ---------------------------------------------------------------------------

def test_diagonal_scalar():
    dec = diagonalize(diag_op([3, 2, 1]))
    assert [t.lam.fibers[0][0, 0].real for t in dec.terms] == pytest.approx([3, 2, 1])
    for i, t in enumerate(dec.terms):
        e = np.zeros((3, 1))
        e[i] = 1
        assert np.allclose(np.abs(t.x.fibers[0]), e)
    assert dec.all_passed()


def test_example35_diagonalization():
    r = run_example35(12)
    assert r.eigenvalue_error <= 1e-10
    assert r.vector_error <= 1e-9
    assert r.inner_square_error <= 1e-9


def test_example35_full_run_with_sign_split():
    K = example35_operator(6)
    dec = diagonalize(K)
    assert dec.all_passed(), dec.report()
    assert [t.part for t in dec.terms][0] == "+" and dec.terms[-1].part == "-"
    for g in range(len(K.grid)):
        assert np.allclose(union_spectrum(dec, g), dense_spectrum(K.fibers[g]), atol=1e-12)


def test_random_m2_oracle(rng):
    grid = ParameterGrid.uniform(5, 2)
    K = ModuleOperator(grid, 4, [random_hermitian(rng, 8) for _ in range(5)])
    dec = diagonalize(K)
    assert dec.all_passed(), dec.report()
    for g in range(5):
        assert np.allclose(union_spectrum(dec, g), dense_spectrum(K.fibers[g]), atol=1e-8)


def test_max_terms_budget(rng):
    K = diag_op([3, 2, 1])
    with pytest.raises(RankError):
        diagonalize(K, max_terms=4)
    assert len(diagonalize(K, max_terms=2)) == 2


def test_non_integer_target_and_rank_deficient_generators():
    # target·n = 1/2 on the scalar fiber is rounded up to 1 and flagged;
    # the scalar fiber then runs out after two steps, the M2 fiber after four
    grid = ParameterGrid([0.5, 0.5], [1, 2])
    K = ModuleOperator(grid, 2, [np.diag([2.0, 1.0]), np.diag([4.0, 3.0, 2.0, 1.0])])
    dec = diagonalize(K, target=0.5)
    assert not dec.exact
    assert not dec.certificate("exact rank target").passed
    assert all(c.passed for c in dec.certificates if c.name != "exact rank target"), dec.report()
    p_ranks = [[int(round(np.trace(f).real)) for f in t.p.fibers] for t in dec.terms]
    assert p_ranks == [[1, 1], [1, 1], [0, 1], [0, 1]]
    assert [t.lam.fibers[1][0, 0].real for t in dec.terms] == pytest.approx([4, 3, 2, 1])


# -- sign split ---------------------------------------------------------------------------

def test_sign_split_examples(rng):
    grid = random_grid(rng, 2, 2)
    K = random_positive_operator(rng, grid, 2)
    plus, zero, minus = sign_split(K)
    assert all(np.allclose(f, np.eye(f.shape[0])) for f in plus.fibers)
    assert zero.ranks() == [0, 0] and minus.ranks() == [0, 0]
    plus, zero, minus = sign_split(diag_op([1, 0, -1]))
    assert plus.ranks() == zero.ranks() == minus.ranks() == [1]


def test_sign_split_example35():
    K = example35_operator(8)
    plus, zero, minus = sign_split(K)
    assert plus.ranks()[1:] == [1] * 7 and minus.ranks()[1:] == [1] * 7
    assert zero.ranks()[1:] == [6] * 7
    for a, b, c, k in zip(plus.fibers, zero.fibers, minus.fibers, K.fibers):
        assert np.allclose(a + b + c, np.eye(8))
        for P in (a, b, c):
            assert np.abs(P @ k - k @ P).max() <= 1e-12


# -- ordered comparison ---------------------------------------------------------------------

def test_compare_regauged(rng):
    grid = random_grid(rng, 4, 2, equal_dims=True)
    K = random_positive_operator(rng, grid, 3)
    dec = diagonalize(K)
    us = [AlgebraField(grid, [random_unitary(rng, n) for n in grid.fiber_dims]) for _ in dec.terms]
    dec2 = dec.regauged(us)
    assert dec2.all_passed(), dec2.report()
    assert compare_ordered(dec, dec2).passed


def test_compare_fill_order(rng):
    vals = [5, 3, 3, 3, 1, 1]
    K = rotated_op(rng, vals, 2)
    a = diagonalize(K, fill_order="ascending")
    b = diagonalize(K, fill_order="descending")
    assert compare_ordered(a, b).passed


def test_compare_different_operators(rng):
    a = diagonalize(diag_op([3, 2, 1]))
    b = diagonalize(diag_op([3, 2.5, 1]))
    rep = compare_ordered(a, b)
    assert not rep.passed and rep.location == (1, 0)


def test_compare_refuses_unseparated(rng):
    # λ1 and λ2 interleave as operators when generators are mixed by hand
    K = diag_op([4, 3, 2, 1], n=2)
    dec = diagonalize(K)
    t0, t1 = dec.terms
    # swap one eigenvector between the terms: spectra {4,2} and {3,1} overlap
    x0 = t0.x.fibers[0].copy()
    x1 = t1.x.fibers[0].copy()
    x0[:, 1], x1[:, 0] = t1.x.fibers[0][:, 0], t0.x.fibers[0][:, 1]
    from modspec.diagonalizer import EigenTerm, SpectralDecomposition, certify

    terms = []
    for x in (x0, x1):
        lam = x.conj().T @ K.fibers[0] @ x
        terms.append(
            EigenTerm(
                ModuleVector(K.grid, 2, [x]),
                AlgebraField(K.grid, [lam]),
                AlgebraField(K.grid, [x.conj().T @ x]),
                np.zeros(1),
            )
        )
    bad = SpectralDecomposition(K, terms)
    bad.certificates = certify(bad)
    assert not bad.certificate("spectral separation").passed
    rep = compare_ordered(dec, bad)
    assert rep.refused


# -- compactness -------------------------------------------------------------------------------

def test_compactness_example35():
    c = compactness_profile(example35_operator(10))
    b = 2.0 ** -np.arange(1, 11)
    assert np.allclose(c[:10], b, atol=1e-15)
    assert c[10] == 0


def test_compactness_identity():
    grid = ParameterGrid.uniform(2, 2)
    c = compactness_profile(ModuleOperator.identity(grid, 5))
    assert np.allclose(c[:5], 1) and c[5] == 0


def test_compactness_rank_one(rng):
    grid = ParameterGrid.uniform(2, 1)
    N = 6
    x = np.exp(-np.arange(N))[:, None]
    y = rng.standard_normal((N, 1))
    K = ModuleOperator(grid, N, [x @ y.T + y @ x.T] * 2)
    c = compactness_profile(K)
    assert np.all(np.diff(c) <= 1e-15)
    for n in range(N):
        bound = np.linalg.norm(x) * np.linalg.norm(y[n:]) + np.linalg.norm(y) * np.linalg.norm(x[n:])
        assert c[n] <= bound + 1e-12
