"""GenEO coarse space for the surrogate matrix A_plus.

In each subdomain the generalized eigenproblem

    diag(mu) A_plus_s diag(mu) y = lam (R_s A_plus R_s^T) y

is solved (mu is the index multiplicity, so diag(mu) is the inverse of the
partition-of-unity block D_s). Eigenvectors with lam < 1/tau are zero-extended
to the whole index set and span the coarse space.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .linalg import DefinitenessError, cholesky, eig_gen_sym
from .splitting import local_block


class ConfigurationError(RuntimeError):
    pass


@dataclass
class GevpResult:
    s: int
    evals: np.ndarray       # non-decreasing
    evecs: np.ndarray       # local vectors, (R_s A_plus R_s^T)-orthonormal columns

    def selected(self, tau):
        return np.flatnonzero(self.evals < 1.0 / tau)


def gevp_matrices(loc, A_plus, P):
    idx = P.domains[loc.s]
    mu = P.multiplicity[idx].astype(np.float64)
    left = loc.A_plus_local() * mu[:, None] * mu[None, :]
    right = local_block(A_plus, idx)
    return left, right


def subdomain_gevp(loc, A_plus, P, method="lapack"):
    left, right = gevp_matrices(loc, A_plus, P)
    try:
        res = eig_gen_sym(left, right, method=method)
    except DefinitenessError as exc:
        raise ConfigurationError(
            f"subdomain {loc.s}: R_s A_plus R_s^T is not positive definite "
            f"(pivot {exc.pivot}); A_plus assembly is broken") from exc
    return GevpResult(s=loc.s, evals=res.evals, evecs=res.evecs)


def gevp_residuals(result, loc, A_plus, P):
    """Per-pair ||left y - lam right y|| / ||left||_F."""
    left, right = gevp_matrices(loc, A_plus, P)
    Y, lam = result.evecs, result.evals
    R = left @ Y - (right @ Y) * lam
    scale = max(np.linalg.norm(left), np.linalg.norm(right))
    return np.linalg.norm(R, axis=0) / scale


@dataclass
class CoarseBasis:
    tau: float
    Z: np.ndarray                    # n x dim, columns are zero-extended local eigenvectors
    origin: list = field(default_factory=list)   # (s, k) per column
    n_selected: int = 0
    dropped: int = 0

    @property
    def dim(self):
        return self.Z.shape[1]


def _pivoted_select(Z, tol):
    """Indices of a numerically independent subset of the columns of Z.

    Pivoted Cholesky on the Gram matrix of the unit-normalized columns, which
    is Gram-Schmidt with the largest remaining residual taken first; a column
    is dropped once its squared residual falls to ``tol`` or below.
    """
    norms = np.linalg.norm(Z, axis=0)
    live = np.flatnonzero(norms > 0)
    if live.size == 0:
        return np.zeros(0, dtype=np.int64)
    Q = Z[:, live] / norms[live]
    G = Q.T @ Q
    k = G.shape[0]
    d = np.diag(G).copy()
    Lrows = np.zeros((k, k))
    chosen = []
    for step in range(k):
        rest = np.setdiff1d(np.arange(k), chosen, assume_unique=True)
        p = int(rest[np.argmax(d[rest])])
        if d[p] <= tol:
            break
        piv = np.sqrt(d[p])
        col = (G[:, p] - Lrows[:, :step] @ Lrows[p, :step]) / piv
        Lrows[:, step] = col
        d -= col * col
        d[p] = 0.0
        chosen.append(p)
    return np.sort(live[np.array(chosen, dtype=np.int64)])


def build_coarse_basis(results, P, tau, dep_tol=1e-10):
    if not tau > 1:
        raise ValueError(f"threshold tau must exceed 1, got {tau}")
    vecs, origin = [], []
    for res in results:
        idx = P.domains[res.s]
        for k in res.selected(tau):
            v = np.zeros(P.n)
            v[idx] = res.evecs[:, k]
            vecs.append(v)
            origin.append((res.s, int(k)))
    if not vecs:
        return CoarseBasis(tau=tau, Z=np.zeros((P.n, 0)))
    Z = np.column_stack(vecs)
    keep = _pivoted_select(Z, dep_tol)
    return CoarseBasis(tau=tau, Z=Z[:, keep], origin=[origin[k] for k in keep],
                       n_selected=len(vecs), dropped=len(vecs) - keep.size)


def coarse_operator(basis, A_plus):
    """Cholesky factor of the Galerkin matrix Z^T A_plus Z."""
    if basis.dim == 0:
        raise ValueError("empty coarse space has no coarse operator")
    Z = basis.Z
    G = Z.T @ (A_plus @ Z)
    G = 0.5 * (G + G.T)
    try:
        L = cholesky(G)
        # a rounding-level pivot means the basis is numerically dependent
        piv = np.diag(L) ** 2
        tiny = np.flatnonzero(piv <= 100 * np.finfo(float).eps * G.shape[0] * np.diag(G).max())
        if tiny.size:
            raise DefinitenessError("numerically singular pivot", pivot=int(tiny[0]))
        return L
    except DefinitenessError as exc:
        raise DefinitenessError(
            f"coarse Galerkin matrix is not positive definite at pivot {exc.pivot}; "
            "tighten the dependence tolerance of the coarse basis", pivot=exc.pivot) from exc


def dump_gevp(results, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "k", "lambda"])
        for res in results:
            for k, lam in enumerate(res.evals):
                w.writerow([res.s, k, repr(float(lam))])
