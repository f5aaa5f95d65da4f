import numpy as np
import pytest

from modspec.algebra import AlgebraField, ParameterGrid, Projection
from modspec.diagonalizer import ModuleOperator

ACCEPTANCE_LINES = {}


def record(criterion: int, passed: bool, detail: str):
    ACCEPTANCE_LINES[criterion] = f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


def random_grid(rng, size, max_dim, equal_dims=False):
    w = rng.uniform(0.2, 1.0, size)
    if equal_dims:
        dims = [int(rng.integers(1, max_dim + 1))] * size
    else:
        dims = [int(d) for d in rng.integers(1, max_dim + 1, size)]
    return ParameterGrid(w / w.sum(), dims)


def random_hermitian(rng, d):
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return 0.5 * (a + a.conj().T)


def random_unitary(rng, d):
    q, r = np.linalg.qr(rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_positive_operator(rng, grid, length, floor=0.05):
    fibers = []
    for n in grid.fiber_dims:
        d = length * n
        a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        fibers.append(a @ a.conj().T / d + floor * np.eye(d))
    return ModuleOperator(grid, length, fibers)


def random_projection_field(rng, grid):
    out = []
    for n in grid.fiber_dims:
        r = int(rng.integers(0, n + 1))
        u = random_unitary(rng, n)[:, :r]
        out.append(u @ u.conj().T)
    return Projection(grid, out)


@pytest.fixture
def rng():
    return np.random.default_rng(20261018)
