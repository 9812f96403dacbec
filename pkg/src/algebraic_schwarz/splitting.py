"""Algebraic splitting A = sum_s R_s^T B_s R_s and the spd surrogate A_plus.

Each local matrix B_s is symmetric but possibly indefinite. Its eigenvectors
with positive eigenvalues assemble into A_plus, the others into the
positive semi-definite, low-rank remainder A_minus = A_plus - A.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .linalg import eig_sym, symmetrize
from .partition import PartitionError


def build_B(A, P):
    """Divide every nonzero A_ij by the number of subdomains containing both i and j."""
    A = sp.csr_matrix(A)
    C = A.tocoo()
    M = P.membership()
    count = (M[C.row] & M[C.col]).sum(axis=1)
    bad = (count == 0) & (C.data != 0)
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise PartitionError(f"nonzero ({C.row[k]}, {C.col[k]}) is not inside any subdomain")
    data = np.where(count > 0, C.data / np.maximum(count, 1), 0.0)
    B = sp.csr_matrix((data, (C.row, C.col)), shape=A.shape)
    B.sort_indices()
    return B


def local_block(M, idx):
    """Dense R_s M R_s^T."""
    return np.asarray(sp.csr_matrix(M)[idx][:, idx].toarray())


@dataclass
class LocalSplit:
    s: int
    B_s: np.ndarray
    evals: np.ndarray
    evecs: np.ndarray
    k_neg: int
    cutoff: float = 0.0      # |lambda| <= cutoff counts as an exact zero

    @property
    def Vneg(self):
        return self.evecs[:, :self.k_neg]

    @property
    def Lneg(self):
        return self.evals[:self.k_neg]

    @property
    def Vpos(self):
        return self.evecs[:, self.k_neg:]

    @property
    def Lpos(self):
        return self.evals[self.k_neg:]

    def A_plus_local(self):
        V = self.Vpos
        return symmetrize((V * self.Lpos) @ V.T)

    def _neg_weights(self):
        w = -self.Lneg
        return np.where(w > self.cutoff, w, 0.0)

    def A_minus_local(self):
        V = self.Vneg
        return symmetrize((V * self._neg_weights()) @ V.T)

    def neg_factor(self):
        """Local F_s with A_minus_local = F_s F_s^T; zero eigenvalues give zero columns."""
        return self.Vneg * np.sqrt(self._neg_weights())


def split_local(B, P, s, zero_tol=1e-12, method="lapack"):
    """Eigendecompose B_s and split at zero.

    An eigenvalue is classified non-positive when it is at most
    ``zero_tol * max|lambda|``; such zeros land in the negative group where
    they contribute nothing to A_minus_local.
    """
    Bs = local_block(B, P.domains[s])
    res = eig_sym(Bs, method=method)
    scale = np.abs(res.evals).max() if res.evals.size else 0.0
    cutoff = zero_tol * scale
    k_neg = int(np.count_nonzero(res.evals <= cutoff))
    return LocalSplit(s=s, B_s=Bs, evals=res.evals, evecs=res.evecs, k_neg=k_neg, cutoff=cutoff)


def split_all(B, P, zero_tol=1e-12, method="lapack"):
    return [split_local(B, P, s, zero_tol, method) for s in range(P.N)]


def assemble_local(blocks, P, shape=None):
    """Sparse sum_s R_s^T X_s R_s for dense local blocks X_s."""
    n = P.n
    rows, cols, vals = [], [], []
    for s, X in enumerate(blocks):
        idx = P.domains[s]
        rows.append(np.repeat(idx, idx.size))
        cols.append(np.tile(idx, idx.size))
        vals.append(np.asarray(X).ravel())
    if not rows:
        return sp.csr_matrix((n, n))
    M = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=shape or (n, n)).tocsr()
    return symmetrize(M)


def negative_factor(locals_, P):
    """Dense n x m factor F = [R_s^T F_s]_s with A_minus = F F^T."""
    blocks = []
    for loc in locals_:
        Fs = loc.neg_factor()
        F = np.zeros((P.n, Fs.shape[1]))
        F[P.domains[loc.s]] = Fs
        blocks.append(F)
    return np.hstack(blocks) if blocks else np.zeros((P.n, 0))


@dataclass
class SurrogateMatrix:
    A_plus: sp.csr_matrix
    locals: list
    A: sp.csr_matrix
    F: np.ndarray            # A_minus = F F^T

    @property
    def shape(self):
        return self.A_plus.shape

    def matvec(self, x):
        """A_plus x evaluated as A x + F (F^T x); far cheaper than the block-filled sparse product."""
        return self.A @ x + self.F @ (self.F.T @ x)

    def apply_minus(self, x):
        return self.F @ (self.F.T @ x)


def assemble_A_plus(A, locals_, P):
    """A_plus = sum_s R_s^T A_plus_s R_s, stored with the full subdomain-block pattern."""
    Ap = assemble_local([loc.A_plus_local() for loc in locals_], P, shape=A.shape)
    return SurrogateMatrix(A_plus=Ap, locals=list(locals_), A=sp.csr_matrix(A),
                           F=negative_factor(locals_, P))


def splitting_residual(A, locals_, P):
    """max |sum_s R_s^T B_s R_s - A| / max |A| over all entries."""
    S = assemble_local([loc.B_s for loc in locals_], P, shape=A.shape)
    D = (S - sp.csr_matrix(A)).tocsr()
    scale = np.abs(sp.csr_matrix(A).data).max()
    return float(np.abs(D.data).max() / scale) if D.nnz else 0.0


@dataclass
class NegativeSpectrum:
    V_minus: np.ndarray      # n x n_minus, orthonormal columns
    L_minus: np.ndarray      # n_minus positive values
    m: int                   # number of local negative directions before compression
    dropped: int

    @property
    def n_minus(self):
        return self.L_minus.size


def negative_spectrum(locals_, P, drop_tol=1e-10):
    """Global A_minus = V_minus diag(L_minus) V_minus^T from the local negative parts.

    Works on the m x m Gram matrix of the concatenated factor
    F = [R_s^T F_s]_s, so the cost scales with m = sum_s k_neg rather than n.
    """
    F = negative_factor(locals_, P)
    if F.shape[1] == 0:
        return NegativeSpectrum(np.zeros((P.n, 0)), np.zeros(0), 0, 0)
    m = F.shape[1]
    G = symmetrize(F.T @ F)
    res = eig_sym(G)
    sigma, Y = res.evals, res.evecs
    smax = sigma.max() if sigma.size else 0.0
    keep = sigma > drop_tol * smax if smax > 0 else np.zeros(sigma.size, dtype=bool)
    sigma, Y = sigma[keep][::-1], Y[:, keep][:, ::-1]
    V = (F @ Y) / np.sqrt(sigma)
    return NegativeSpectrum(V_minus=V, L_minus=sigma, m=m, dropped=int(m - sigma.size))


def dump_local_spectra(locals_, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "k", "lambda"])
        for loc in locals_:
            for k, lam in enumerate(loc.evals):
                w.writerow([loc.s, k, repr(float(lam))])
