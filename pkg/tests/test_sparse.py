"""Iterative solvers against dense oracles, singular systems, warm starts."""

from __future__ import annotations

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from nspnp.sparse import SolveReport, bicgstab, cg, spmv


def random_spd(n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, n))
    return g @ g.T + n * np.eye(n)


def neumann_laplacian_1d(n: int) -> np.ndarray:
    """Singular tridiagonal stiffness of -u'' with natural ends; kernel = constants."""
    a = 2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)
    a[0, 0] = a[-1, -1] = 1.0
    return a


@pytest.mark.parametrize("n", [5, 17, 50])
def test_cg_matches_dense_solve(n):
    a = random_spd(n, seed=n)
    rng = np.random.default_rng(n + 1)
    b = rng.standard_normal(n)
    x_ref = np.linalg.solve(a, b)
    x, report = cg(sp.csr_matrix(a), b, tol=1e-13)
    assert report.converged
    assert np.linalg.norm(x - x_ref) / np.linalg.norm(x_ref) < 1e-8


@pytest.mark.parametrize("n", [5, 17, 50])
def test_bicgstab_matches_dense_solve(n):
    rng = np.random.default_rng(2 * n)
    a = rng.standard_normal((n, n)) + n * np.eye(n)
    b = rng.standard_normal(n)
    x_ref = np.linalg.solve(a, b)
    x, report = bicgstab(sp.csr_matrix(a), b, tol=1e-13)
    assert report.converged
    assert np.linalg.norm(x - x_ref) / np.linalg.norm(x_ref) < 1e-8


def test_cg_and_bicgstab_agree_on_spd():
    a = sp.csr_matrix(random_spd(30, seed=9))
    b = np.sin(np.arange(30, dtype=float))
    x1, r1 = cg(a, b, tol=1e-13)
    x2, r2 = bicgstab(a, b, tol=1e-13)
    assert r1.converged and r2.converged
    assert np.linalg.norm(x1 - x2) / np.linalg.norm(x1) < 1e-10


def test_projected_cg_on_singular_neumann_system():
    n = 18
    a = neumann_laplacian_1d(n)
    rng = np.random.default_rng(4)
    b = rng.standard_normal(n)
    b -= b.mean()  # compatible right-hand side
    x_ref = np.linalg.pinv(a) @ b  # minimum-norm solution has zero mean here
    x, report = cg(
        sp.csr_matrix(a), b, tol=1e-12, project_out_constants=True, diagonal_precondition=False
    )
    assert report.converged
    assert abs(x.mean()) < 1e-12
    assert np.linalg.norm(x - x_ref) < 1e-8
    assert np.linalg.norm(a @ x - b) / np.linalg.norm(b) <= 1e-11


def test_warm_start_at_solution_converges_immediately():
    a = sp.csr_matrix(random_spd(20, seed=1))
    b = np.arange(20, dtype=float)
    x_ref, _ = cg(a, b, tol=1e-13)
    x, report = cg(a, b, x0=x_ref, tol=1e-10)
    assert report.converged
    assert report.iterations <= 1
    x2, report2 = bicgstab(a, b, x0=x_ref, tol=1e-10)
    assert report2.converged
    assert report2.iterations <= 1


def test_zero_rhs_returns_zero():
    a = sp.csr_matrix(random_spd(12, seed=5))
    for solver in (cg, bicgstab):
        x, report = solver(a, np.zeros(12))
        assert report.converged
        np.testing.assert_array_equal(x, 0.0)


def test_nonconvergence_reported_not_raised():
    a = sp.csr_matrix(random_spd(40, seed=8))
    b = np.ones(40)
    x, report = cg(a, b, tol=1e-14, max_iter=1)
    assert not report.converged
    assert report.iterations == 1
    assert report.residual > 1e-14


def test_report_residual_is_true_relative_residual():
    a = sp.csr_matrix(random_spd(25, seed=13))
    b = np.cos(np.arange(25, dtype=float))
    x, report = cg(a, b, tol=1e-11)
    observed = np.linalg.norm(b - a @ x) / np.linalg.norm(b)
    assert report.residual == pytest.approx(observed, rel=1e-6, abs=1e-16)


def test_spmv_validates_shape():
    a = sp.csr_matrix(np.eye(3))
    with pytest.raises(ValueError):
        spmv(a, np.ones(4))
    np.testing.assert_array_equal(spmv(a, np.ones(3)), np.ones(3))


def test_solve_report_is_frozen():
    report = SolveReport(iterations=3, residual=1e-12, converged=True)
    with pytest.raises(AttributeError):
        report.iterations = 4  # type: ignore[misc]


@settings(max_examples=30, deadline=None, derandomize=True)
@given(
    n=st.integers(min_value=2, max_value=24),
    seed=st.integers(min_value=0, max_value=2**31 - 1),
)
def test_cg_residual_contract(n, seed):
    rng = np.random.default_rng(seed)
    a = random_spd(n, seed=seed % 1000)
    b = rng.standard_normal(n)
    x, report = cg(sp.csr_matrix(a), b, tol=1e-10)
    if report.converged:
        assert np.linalg.norm(b - a @ x) <= 1.01e-10 * np.linalg.norm(b)


@settings(max_examples=30, deadline=None, derandomize=True)
@given(
    n=st.integers(min_value=2, max_value=24),
    seed=st.integers(min_value=0, max_value=2**31 - 1),
)
def test_bicgstab_residual_contract(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n)) + 2.0 * n * np.eye(n)
    b = rng.standard_normal(n)
    x, report = bicgstab(sp.csr_matrix(a), b, tol=1e-10)
    if report.converged:
        assert np.linalg.norm(b - a @ x) <= 1.01e-10 * np.linalg.norm(b)
