"""Two-level Schwarz preconditioner for A_plus and its Woodbury correction for A.

    H_plus = sum_s R_s^T (R_s A_plus R_s^T)^{-1} R_s + Z (Z^T A_plus Z)^{-1} Z^T
    H      = H_plus + W S^{-1} W^T,  W = A_plus^{-1} V_minus,
                                     S = diag(L_minus)^{-1} - V_minus^T W

Because A = A_plus - V_minus diag(L_minus) V_minus^T, the correction term is
exactly A^{-1} - A_plus^{-1}, so H inherits the spectral bounds of H_plus.
"""
from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .coarse import CoarseBasis, build_coarse_basis, coarse_operator, subdomain_gevp
from .krylov import AdditiveSchwarz, pcg
from .linalg import cholesky, ldlt, solve_chol, solve_ldlt, SingularMatrixError
from .partition import coloring_bound
from .splitting import SurrogateMatrix, assemble_A_plus, build_B, negative_spectrum, split_local

log = logging.getLogger(__name__)

DENSE_CUTOFF = 2000


class SetupError(RuntimeError):
    pass


class TwoLevelPrec:
    """H_plus(tau): local exact solves on A_plus blocks plus an optional coarse solve."""

    def __init__(self, A_plus, P, basis=None):
        self.n = P.n
        self.local = AdditiveSchwarz(A_plus, P)
        self.basis = basis
        self.tau = basis.tau if basis is not None else None
        if basis is not None and basis.dim > 0:
            self.Z = basis.Z
            self.coarse_factor = coarse_operator(basis, A_plus)
        else:
            self.Z = None
            self.coarse_factor = None

    @property
    def coarse_dim(self):
        return 0 if self.Z is None else self.Z.shape[1]

    def apply(self, x):
        y = self.local.apply(x)
        if self.Z is not None:
            y += self.Z @ solve_chol(self.coarse_factor, self.Z.T @ x)
        return y

    __call__ = apply


def build_H_plus(A_plus, P, basis=None):
    return TwoLevelPrec(A_plus, P, basis)


@dataclass
class WoodburyCorrection:
    W: np.ndarray
    S: np.ndarray
    S_factor: object
    mode: str
    iterations: list = field(default_factory=list)
    residuals: list = field(default_factory=list)

    @property
    def n_minus(self):
        return self.W.shape[1]

    def apply(self, x):
        if self.n_minus == 0:
            return np.zeros_like(x)
        return self.W @ solve_ldlt(self.S_factor, self.W.T @ x)

    def report(self):
        return {"mode": self.mode, "n_minus": self.n_minus,
                "iterations": list(self.iterations), "residuals": list(self.residuals)}


def woodbury_setup(A_plus, H_plus, neg, mode="auto", tol=1e-12, maxit=None,
                   dense_cutoff=DENSE_CUTOFF):
    """Form W = A_plus^{-1} V_minus and factor S = diag(L_minus)^{-1} - V_minus^T W.

    ``mode="iterative"`` solves one PCG system per column of V_minus,
    preconditioned by ``H_plus``; ``mode="dense"`` factors A_plus densely.
    ``"auto"`` picks dense when n <= dense_cutoff.
    """
    n = A_plus.shape[0]
    if isinstance(A_plus, SurrogateMatrix):
        Ap_op, Ap = A_plus.matvec, A_plus.A_plus
    else:
        Ap = sp.csr_matrix(A_plus)
        Ap_op = Ap.__matmul__
    V, lam = neg.V_minus, neg.L_minus
    k = V.shape[1]
    if mode == "auto":
        mode = "dense" if n <= dense_cutoff else "iterative"
    if mode not in ("dense", "iterative"):
        raise ValueError(f"unknown Woodbury setup mode {mode!r}")
    if k == 0:
        return WoodburyCorrection(W=np.zeros((n, 0)), S=np.zeros((0, 0)),
                                  S_factor=ldlt(np.zeros((0, 0))), mode=mode)
    iters, resid = [], []
    if mode == "dense":
        L = cholesky(Ap.toarray())
        W = solve_chol(L, V)
        iters = [0] * k
    else:
        maxit = 10 * n if maxit is None else maxit
        W = np.zeros((n, k))
        for j in range(k):
            w, rep = pcg(Ap_op, V[:, j], H_plus, tol=tol, maxit=maxit)
            if not rep.converged:
                raise SetupError(f"PCG for column {j} of V_minus did not converge in {maxit} "
                                 f"iterations (residual {rep.rel_residuals[-1]:.2e})")
            W[:, j] = w
            iters.append(rep.iterations)
    R = Ap_op(W) - V
    resid = (np.linalg.norm(R, axis=0) / np.linalg.norm(V, axis=0)).tolist()
    S = np.diag(1.0 / lam) - V.T @ W
    S = 0.5 * (S + S.T)
    try:
        F = ldlt(S)
    except SingularMatrixError as exc:
        raise SetupError(f"Woodbury capacitance matrix is singular ({exc}); "
                         "raise the drop tolerance of the negative spectrum") from exc
    return WoodburyCorrection(W=W, S=S, S_factor=F, mode=mode, iterations=iters, residuals=resid)


class AlgebraicPreconditioner:
    """H(tau) = H_plus(tau) + W S^{-1} W^T."""

    def __init__(self, H_plus, correction):
        self.H_plus = H_plus
        self.correction = correction
        self.n = H_plus.n

    def apply(self, x):
        y = self.H_plus.apply(x)
        if self.correction is not None and self.correction.n_minus:
            y += self.correction.apply(x)
        return y

    __call__ = apply


def apply_H(prec, corr, x):
    y = prec.apply(x)
    if corr is not None and corr.n_minus:
        y = y + corr.apply(x)
    return y


def verify_woodbury(A, A_plus, neg):
    """max |A^{-1} - (A_plus^{-1} + A_plus^{-1} V (L^{-1} - V^T A_plus^{-1} V)^{-1} V^T A_plus^{-1})|,
    relative to max |A^{-1}|; dense, for small problems only."""
    A = np.asarray(A.toarray() if sp.issparse(A) else A, dtype=np.float64)
    Ap = np.asarray(A_plus.toarray() if sp.issparse(A_plus) else A_plus, dtype=np.float64)
    lhs = np.linalg.inv(A)
    Api = np.linalg.inv(Ap)
    V, lam = neg.V_minus, neg.L_minus
    rhs = Api.copy()
    if V.shape[1]:
        W = Api @ V
        S = np.diag(1.0 / lam) - V.T @ W
        rhs += W @ np.linalg.solve(S, W.T)
    return float(np.abs(lhs - rhs).max() / np.abs(lhs).max())


def _mapper(threads):
    if threads <= 1:
        return lambda f, xs: [f(x) for x in xs]

    def pmap(f, xs):
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(f, xs))
    return pmap


@dataclass
class Setup:
    """Everything built for H(tau), with the quantities reported in comparisons."""
    A: sp.csr_matrix
    P: object
    tau: float
    B: sp.csr_matrix
    locals: list
    surrogate: object
    gevp: list
    basis: object
    neg: object
    H_plus: TwoLevelPrec
    correction: WoodburyCorrection
    H: AlgebraicPreconditioner
    n_plus: int
    timings: dict

    @property
    def A_plus(self):
        return self.surrogate.A_plus

    @property
    def coarse_dim(self):
        return self.basis.dim

    @property
    def n_minus(self):
        return self.neg.n_minus

    def bounds(self):
        """Theoretical interval [1/((1 + 2 N_plus) tau), N_plus + 1]."""
        return 1.0 / ((1 + 2 * self.n_plus) * self.tau), float(self.n_plus + 1)


def setup_preconditioner(A, P, tau=10.0, zero_tol=1e-12, drop_tol=1e-10, dep_tol=1e-10,
                         woodbury_mode="auto", woodbury_tol=1e-12, dense_cutoff=DENSE_CUTOFF,
                         coarse=True, correction=True, eig_method="lapack", threads=1):
    """Build H(tau) for ``A`` on the minimal-overlap partition ``P``.

    ``coarse=False`` drops the GenEO coarse space and ``correction=False``
    drops the Woodbury term (H = H_plus). ``threads > 1`` runs the
    per-subdomain eigenproblems in a thread pool; results do not depend on it.
    """
    if coarse and not tau > 1:
        raise ValueError(f"threshold tau must exceed 1, got {tau}")
    A = sp.csr_matrix(A)
    t = {}
    t0 = time.perf_counter()
    B = build_B(A, P)
    pmap = _mapper(threads)
    locals_ = pmap(lambda s: split_local(B, P, s, zero_tol, eig_method), range(P.N))
    sur = assemble_A_plus(A, locals_, P)
    t["splitting"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    results = pmap(lambda loc: subdomain_gevp(loc, sur.A_plus, P, method=eig_method), locals_) if coarse else []
    basis = build_coarse_basis(results, P, tau, dep_tol=dep_tol) if coarse else None
    t["coarse"] = time.perf_counter() - t0
    log.info("coarse space: %d selected, %d kept", basis.n_selected if basis else 0,
             basis.dim if basis else 0)

    t0 = time.perf_counter()
    H_plus = build_H_plus(sur.A_plus, P, basis)
    t["local_factors"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    neg = negative_spectrum(locals_, P, drop_tol=drop_tol)
    if correction:
        corr = woodbury_setup(sur, H_plus, neg, mode=woodbury_mode, tol=woodbury_tol,
                              dense_cutoff=dense_cutoff)
    else:
        corr = None
    t["woodbury"] = time.perf_counter() - t0
    log.info("negative spectrum: m=%d, n_minus=%d", neg.m, neg.n_minus)

    n_plus = coloring_bound(sur.A_plus, P)
    if basis is None:
        basis = CoarseBasis(tau=tau, Z=np.zeros((P.n, 0)))
    return Setup(A=A, P=P, tau=tau, B=B, locals=locals_, surrogate=sur, gevp=results,
                 basis=basis, neg=neg, H_plus=H_plus, correction=corr,
                 H=AlgebraicPreconditioner(H_plus, corr), n_plus=n_plus, timings=t)
