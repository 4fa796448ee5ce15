"""Compressed sparse row matrices and deterministic Krylov solvers.

Storage is scipy's CSR format: ``indptr`` holds the row offsets, ``indices``
the column indices, ``data`` the values.  The solvers below are written
directly against matrix-vector products so their iteration history (and hence
every digit of the output) is a pure function of the inputs; no threading or
order-of-reduction surprises.

``cg`` optionally projects the right-hand side and every iterate onto the
orthogonal complement of the constant vector.  That keeps pure Neumann
(consistent singular) systems well posed without modifying the matrix: the
operator is symmetric positive definite on that subspace and the projection
commutes with it whenever ones span the kernel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse

CsrMatrix = scipy.sparse.csr_matrix

__all__ = ["CsrMatrix", "SolveReport", "spmv", "cg", "bicgstab"]

# Relative rho breakdown threshold for bicgstab, scaled by the vector norms.
_BREAKDOWN = 1e-30


@dataclass(frozen=True)
class SolveReport:
    """Outcome of an iterative solve.

    residual is the true relative residual ||b - A x|| / ||b|| recomputed
    from the returned iterate (absolute when b = 0).
    """

    iterations: int
    residual: float
    converged: bool


def spmv(matrix: CsrMatrix, x) -> np.ndarray:
    """Matrix-vector product with a shape check."""
    x = np.asarray(x, dtype=float)
    if x.shape != (matrix.shape[1],):
        raise ValueError(f"shape mismatch: matrix {matrix.shape}, vector {x.shape}")
    return matrix @ x


def _deflate(v: np.ndarray) -> np.ndarray:
    v -= v.mean()
    return v


def cg(
    matrix: CsrMatrix,
    b,
    x0=None,
    tol: float = 1e-12,
    max_iter: int | None = None,
    project_out_constants: bool = False,
    diagonal_precondition: bool = True,
):
    """Preconditioned conjugate gradients for symmetric positive (semi)definite systems.

    Returns (x, SolveReport).  tol is relative to ||b||.  With
    project_out_constants the right-hand side, the initial guess, and every
    preconditioned residual are deflated by their mean, which solves
    consistent singular systems whose kernel is spanned by ones.
    """
    b = np.asarray(b, dtype=float).copy()
    n = b.shape[0]
    if matrix.shape != (n, n):
        raise ValueError(f"shape mismatch: matrix {matrix.shape}, rhs {b.shape}")
    if max_iter is None:
        max_iter = 10 * n
    if project_out_constants:
        _deflate(b)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), SolveReport(iterations=0, residual=0.0, converged=True)

    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    if project_out_constants:
        _deflate(x)
    inv_diag = None
    if diagonal_precondition:
        d = matrix.diagonal()
        if np.any(d <= 0):
            raise ValueError("Jacobi preconditioning needs a positive diagonal")
        inv_diag = 1.0 / d

    def true_residual(xv):
        rt = b - matrix @ xv
        if project_out_constants:
            _deflate(rt)
        return rt

    def fresh_direction(rv):
        zv = inv_diag * rv if inv_diag is not None else rv.copy()
        if project_out_constants:
            _deflate(zv)
        return zv

    r = true_residual(x)
    z = fresh_direction(r)
    p = z.copy()
    rz = float(r @ z)
    iterations = 0
    refreshes = 0
    converged = np.linalg.norm(r) <= tol * bnorm
    while not converged and iterations < max_iter:
        q = matrix @ p
        pq = float(p @ q)
        if pq <= 0.0:
            break  # lost positive definiteness (numerically), report as is
        alpha = rz / pq
        x += alpha * p
        r -= alpha * q
        if project_out_constants:
            _deflate(r)
            _deflate(x)
        iterations += 1
        if np.linalg.norm(r) <= tol * bnorm:
            # The recurrence residual drifts from the true one near the end;
            # verify against b - A x and, on a near miss, keep iterating from
            # the recomputed residual instead of reporting failure.
            r = true_residual(x)
            if np.linalg.norm(r) <= tol * bnorm or refreshes >= 5:
                converged = np.linalg.norm(r) <= tol * bnorm
                break
            refreshes += 1
            z = fresh_direction(r)
            p = z.copy()
            rz = float(r @ z)
            continue
        z = fresh_direction(r)
        rz_next = float(r @ z)
        p = z + (rz_next / rz) * p
        rz = rz_next

    true_res = np.linalg.norm(true_residual(x)) / bnorm
    return x, SolveReport(
        iterations=iterations, residual=float(true_res), converged=bool(true_res <= tol)
    )


def bicgstab(
    matrix: CsrMatrix,
    b,
    x0=None,
    tol: float = 1e-12,
    max_iter: int | None = None,
    diagonal_precondition: bool = True,
):
    """Stabilized biconjugate gradients (van der Vorst) for nonsymmetric systems.

    Returns (x, SolveReport).  On a rho breakdown the method restarts once
    from the current iterate with a fresh shadow residual; a second breakdown
    reports failure.
    """
    b = np.asarray(b, dtype=float).copy()
    n = b.shape[0]
    if matrix.shape != (n, n):
        raise ValueError(f"shape mismatch: matrix {matrix.shape}, rhs {b.shape}")
    if max_iter is None:
        max_iter = 10 * n
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), SolveReport(iterations=0, residual=0.0, converged=True)

    inv_diag = None
    if diagonal_precondition:
        d = matrix.diagonal()
        if np.any(d == 0):
            raise ValueError("Jacobi preconditioning needs a nonzero diagonal")
        inv_diag = 1.0 / d

    def precond(v):
        return inv_diag * v if inv_diag is not None else v

    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    r = b - matrix @ x
    r_shadow = r.copy()
    rho = alpha = omega = 1.0
    v = np.zeros(n)
    p = np.zeros(n)
    iterations = 0
    restarted = False
    refreshes = 0
    converged = np.linalg.norm(r) <= tol * bnorm

    def verified(xv) -> bool:
        return np.linalg.norm(b - matrix @ xv) <= tol * bnorm

    def refresh():
        # Re-seed the recurrence from the true residual at the current x.
        nonlocal r, r_shadow, rho, alpha, omega
        r = b - matrix @ x
        r_shadow = r.copy()
        rho = alpha = omega = 1.0
        v[:] = 0.0
        p[:] = 0.0

    while not converged and iterations < max_iter:
        rho_next = float(r_shadow @ r)
        if abs(rho_next) < _BREAKDOWN * max(
            1.0, float(np.linalg.norm(r_shadow) * np.linalg.norm(r))
        ):
            if restarted:
                break
            # Restart from the current iterate with a fresh shadow residual.
            restarted = True
            refresh()
            continue
        beta = (rho_next / rho) * (alpha / omega)
        p = r + beta * (p - omega * v)
        p_hat = precond(p)
        v = matrix @ p_hat
        denom = float(r_shadow @ v)
        if denom == 0.0:
            if restarted:
                break
            restarted = True
            refresh()
            continue
        alpha = rho_next / denom
        s = r - alpha * v
        iterations += 1
        if np.linalg.norm(s) <= tol * bnorm and verified(x + alpha * p_hat):
            x += alpha * p_hat
            converged = True
            break
        s_hat = precond(s)
        t = matrix @ s_hat
        tt = float(t @ t)
        if tt == 0.0:
            x += alpha * p_hat
            converged = verified(x)
            break
        omega = float(t @ s) / tt
        x += alpha * p_hat + omega * s_hat
        r = s - omega * t
        rho = rho_next
        if omega == 0.0:
            break
        if np.linalg.norm(r) <= tol * bnorm:
            if verified(x):
                converged = True
                break
            if refreshes >= 5:
                break
            refreshes += 1
            refresh()

    true_res = np.linalg.norm(b - matrix @ x) / bnorm
    return x, SolveReport(
        iterations=iterations, residual=float(true_res), converged=bool(true_res <= tol)
    )
