"""Sparse/dense linear algebra used throughout the package.

Sparse matrices are ``scipy.sparse.csr_matrix`` instances with sorted,
duplicate-free column indices; symmetric matrices are stored with both
triangles. Dense matrices and vectors are plain ``numpy`` arrays.
"""
import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_triangular


class NotSPDError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    """CG did not reach the requested tolerance."""

    def __init__(self, message, residual, iterations):
        super().__init__(f"{message} (relative residual {residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


def csr_from_triplets(rows, cols, vals, shape):
    """Sum duplicate (row, col, value) triplets into a canonical CSR matrix."""
    A = sp.coo_matrix(
        (np.ravel(vals), (np.ravel(rows), np.ravel(cols))), shape=shape
    ).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def spmv(A, x):
    x = np.asarray(x, dtype=float)
    if A.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: matrix has {A.shape[1]} columns, vector has {x.shape[0]} entries")
    return A @ x


def cg_solve(A, b, tol=1e-10, max_iter=None, x0=None, full_output=False):
    """Jacobi-preconditioned conjugate gradients for SPD ``A``.

    Stops once ``||b - A x||_2 <= tol * ||b||_2`` (checked against the true
    residual, not only the recurrence). With ``full_output`` returns
    ``(x, iterations, relative_residual)``.
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"dimension mismatch: matrix {A.shape}, right-hand side {n}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter is None:
        max_iter = 10 * max(n, 1)
    diag = A.diagonal()
    if np.any(diag == 0):
        raise ValueError("zero diagonal entry; Jacobi preconditioner undefined")
    inv_diag = 1.0 / diag

    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        x = np.zeros(n)
        return (x, 0, 0.0) if full_output else x

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    target = tol * bnorm
    it = 0
    while True:
        rnorm = np.linalg.norm(r)
        if rnorm <= target:
            break
        z = inv_diag * r
        p = z.copy()
        rz = r @ z
        converged = False
        while it < max_iter:
            it += 1
            Ap = A @ p
            pAp = p @ Ap
            if pAp <= 0:
                raise NotSPDError("matrix is not positive definite (p^T A p <= 0 in CG)")
            alpha = rz / pAp
            x += alpha * p
            r -= alpha * Ap
            if np.linalg.norm(r) <= target:
                converged = True
                break
            z = inv_diag * r
            rz_new = r @ z
            p = z + (rz_new / rz) * p
            rz = rz_new
        # recompute the true residual; restart if the recurrence drifted
        r = b - A @ x
        if not converged or it >= max_iter:
            rel = np.linalg.norm(r) / bnorm
            if rel <= tol:
                break
            raise ConvergenceError("CG did not converge", rel, it)
    rel = np.linalg.norm(r) / bnorm
    return (x, it, rel) if full_output else x


def cholesky(A):
    """Lower-triangular Cholesky factor; raises NotSPDError on a non-positive pivot."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("matrix must be square")
    L = np.zeros_like(A)
    scale = np.max(np.abs(np.diag(A))) if n else 0.0
    floor = 64 * np.finfo(float).eps * max(n, 1) * scale
    for j in range(n):
        d = A[j, j] - L[j, :j] @ L[j, :j]
        if not d > floor:
            raise NotSPDError(f"matrix not SPD (pivot {d:.3e} at row {j})")
        L[j, j] = np.sqrt(d)
        L[j + 1:, j] = (A[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def dense_solve_spd(A, b):
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.shape[0] != b.shape[0]:
        raise ValueError("dimension mismatch")
    L = cholesky(A)
    y = solve_triangular(L, b, lower=True)
    return solve_triangular(L.T, y, lower=False)
