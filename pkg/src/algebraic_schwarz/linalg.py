"""Dense and sparse symmetric kernels.

Sparse matrices are plain ``scipy.sparse.csr_matrix`` objects in canonical
form (float64, sorted column indices, no duplicates, full symmetric pattern).
Dense matrices are 2-D numpy arrays. The factorizations wrap LAPACK directly
so that failures carry the offending pivot instead of a generic message.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.linalg import lapack, solve_triangular


class DefinitenessError(np.linalg.LinAlgError):
    """A matrix expected to be positive definite is not."""

    def __init__(self, msg, pivot=None):
        super().__init__(msg)
        self.pivot = pivot


class SingularMatrixError(np.linalg.LinAlgError):
    pass


class ConvergenceError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# sparse
# ---------------------------------------------------------------------------

def sparse_sym(A, check=True):
    """Return ``A`` as a canonical CSR matrix; optionally verify exact symmetry."""
    A = sp.csr_matrix(A, dtype=np.float64)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix is not square: {A.shape}")
    A.sum_duplicates()
    A.sort_indices()
    if check:
        D = A - A.T
        D.eliminate_zeros()
        if D.nnz:
            raise ValueError("matrix is not exactly symmetric")
    return A


def symmetrize(A):
    """(A + A^T)/2 for sparse or dense input; the result is bitwise symmetric."""
    if sp.issparse(A):
        S = sp.csr_matrix(A, dtype=np.float64)
        S = (S + S.T) * 0.5
        S.sum_duplicates()
        S.sort_indices()
        return S
    A = np.asarray(A, dtype=np.float64)
    return 0.5 * (A + A.T)


def spmv(A, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != A.shape[1]:
        raise ValueError(f"dimension mismatch: matrix {A.shape}, vector {x.shape}")
    return A @ x


# ---------------------------------------------------------------------------
# symmetric eigenproblems
# ---------------------------------------------------------------------------

class EigenSym(NamedTuple):
    evals: np.ndarray   # non-decreasing
    evecs: np.ndarray   # column k pairs with evals[k]


def _check_square(M):
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ConvergenceError("matrix contains non-finite entries")
    return M


def _off_norm(A):
    # direct sum; ||A||^2 - ||diag A||^2 cancels catastrophically near convergence
    return float(np.sqrt(np.sum(np.triu(A, 1) ** 2) * 2.0))


def jacobi_eigh(M, tol=1e-13, max_sweeps=50):
    """Cyclic Jacobi eigensolver for a dense symmetric matrix.

    Sweeps over all (p, q) pairs until the off-diagonal Frobenius norm drops
    below ``tol * ||M||_F``. Cost is O(m^3) per sweep with O(m) numpy work per
    rotation, so it is intended for small blocks.
    """
    M = _check_square(M)
    A = 0.5 * (M + M.T)
    m = A.shape[0]
    V = np.eye(m)
    scale = np.linalg.norm(A)
    if m <= 1 or scale == 0.0:
        d = np.diag(A).copy()
        order = np.argsort(d, kind="stable")
        return EigenSym(d[order], V[:, order])
    threshold = tol * scale
    # entries below this are left alone; together they stay under threshold / 2
    skip = threshold / (2.0 * m)
    for _ in range(max_sweeps):
        off = _off_norm(A)
        if off <= threshold:
            break
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = A[p, q]
                if abs(apq) <= skip:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                Ap = A[:, p].copy()
                Aq = A[:, q].copy()
                A[:, p] = c * Ap - s * Aq
                A[:, q] = s * Ap + c * Aq
                Ap = A[p, :].copy()
                Aq = A[q, :].copy()
                A[p, :] = c * Ap - s * Aq
                A[q, :] = s * Ap + c * Aq
                Vp = V[:, p].copy()
                V[:, p] = c * Vp - s * V[:, q]
                V[:, q] = s * Vp + c * V[:, q]
    else:
        off = _off_norm(A)
        if off > threshold:
            raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps (off={off:.3e})")
    d = np.diag(A).copy()
    order = np.argsort(d, kind="stable")
    return EigenSym(d[order], V[:, order])


def eig_sym(M, method="lapack"):
    """Full eigendecomposition of a dense symmetric matrix, eigenvalues ascending.

    ``method="lapack"`` calls ``numpy.linalg.eigh``; ``method="jacobi"`` uses
    :func:`jacobi_eigh`.
    """
    M = _check_square(M)
    if method == "jacobi":
        return jacobi_eigh(M)
    if method != "lapack":
        raise ValueError(f"unknown eigensolver {method!r}")
    try:
        w, V = np.linalg.eigh(0.5 * (M + M.T))
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(str(exc)) from exc
    return EigenSym(w, V)


def eig_gen_sym(Mleft, Mright, method="lapack"):
    """Solve ``Mleft y = lam Mright y`` with Mright spd.

    Reduces to a standard problem through the Cholesky factor
    ``Mright = L L^T``; the returned eigenvectors are Mright-orthonormal.
    """
    Mleft = _check_square(Mleft)
    L = cholesky(Mright)
    C = solve_triangular(L, Mleft, lower=True)
    C = solve_triangular(L, C.T, lower=True)
    res = eig_sym(C, method=method)
    Y = solve_triangular(L, res.evecs, lower=True, trans="T")
    return EigenSym(res.evals, Y)


# ---------------------------------------------------------------------------
# factorizations
# ---------------------------------------------------------------------------

def cholesky(M):
    """Lower Cholesky factor; raises :class:`DefinitenessError` with the failing pivot."""
    M = _check_square(M)
    if M.shape[0] == 0:
        return M.copy()
    L, info = lapack.dpotrf(M, lower=1, clean=1)
    if info > 0:
        raise DefinitenessError(f"non-positive pivot at index {info - 1}", pivot=info - 1)
    if info < 0:
        raise ValueError(f"dpotrf: illegal argument {-info}")
    return L


def solve_chol(L, rhs):
    rhs = np.asarray(rhs, dtype=np.float64)
    if L.shape[0] == 0:
        return rhs.copy()
    vec = rhs.ndim == 1
    x, info = lapack.dpotrs(L, rhs[:, None] if vec else rhs, lower=1)
    if info != 0:
        raise ValueError(f"dpotrs failed with info={info}")
    return x[:, 0] if vec else x


class LDLFactor(NamedTuple):
    ldu: np.ndarray
    ipiv: np.ndarray
    rcond: float


def ldlt(M, rcond_min=None):
    """Bunch-Kaufman factorization of a symmetric (possibly indefinite) matrix."""
    M = _check_square(M)
    m = M.shape[0]
    if m == 0:
        return LDLFactor(M.copy(), np.zeros(0, dtype=np.int32), 1.0)
    ldu, ipiv, info = lapack.dsytrf(M, lower=1)
    if info > 0:
        raise SingularMatrixError(f"exactly zero pivot block at index {info - 1}")
    anorm = np.abs(M).sum(axis=0).max()
    rcond, _ = lapack.dsycon(ldu, ipiv, anorm, lower=1)
    if rcond_min is None:
        rcond_min = np.finfo(float).eps
    if not rcond > rcond_min:
        raise SingularMatrixError(f"matrix is singular to working precision (rcond={rcond:.2e})")
    return LDLFactor(ldu, ipiv, float(rcond))


def solve_ldlt(factor, rhs):
    rhs = np.asarray(rhs, dtype=np.float64)
    if factor.ldu.shape[0] == 0:
        return rhs.copy()
    vec = rhs.ndim == 1
    x, info = lapack.dsytrs(factor.ldu, factor.ipiv, rhs[:, None] if vec else rhs, lower=1)
    if info != 0:
        raise ValueError(f"dsytrs failed with info={info}")
    return x[:, 0] if vec else x
