"""Preconditioned conjugate gradients with spectral instrumentation.

The PCG step lengths alpha_k and beta_k define the Lanczos tridiagonal of
the preconditioned operator H A, so every solve also yields Ritz estimates of
its extreme eigenvalues and condition number.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .linalg import DefinitenessError, cholesky, eig_sym, solve_chol
from .splitting import local_block


def as_operator(A):
    if A is None:
        return lambda x: x.copy()
    if callable(A) and not hasattr(A, "shape"):
        return A
    if hasattr(A, "apply"):
        return A.apply
    return lambda x: A @ x


@dataclass
class SolveReport:
    iterations: int = 0
    converged: bool = False
    rel_residuals: list = field(default_factory=list)
    prec_residuals: list = field(default_factory=list)
    anorm_errors: Optional[list] = None
    alphas: list = field(default_factory=list)
    betas: list = field(default_factory=list)
    ritz: np.ndarray = field(default_factory=lambda: np.zeros(0))
    lambda_min: float = math.nan
    lambda_max: float = math.nan
    kappa: float = math.nan
    partial: bool = True

    def summary(self):
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "final_rel_residual": self.rel_residuals[-1] if self.rel_residuals else None,
            "lambda_min": self.lambda_min,
            "lambda_max": self.lambda_max,
            "kappa": self.kappa,
        }


def lanczos_tridiagonal(alphas, betas):
    """Lanczos matrix T of H A rebuilt from the PCG coefficients."""
    a = np.asarray(alphas, dtype=np.float64)
    b = np.asarray(betas, dtype=np.float64)[: max(a.size - 1, 0)]
    k = a.size
    diag = 1.0 / a
    diag[1:] += b / a[:-1]
    off = np.sqrt(b) / a[:-1]
    return np.diag(diag) + np.diag(off, 1) + np.diag(off, -1) if k else np.zeros((0, 0))


def ritz_spectrum(report):
    """(lambda_min, lambda_max, kappa) from the recorded PCG coefficients.

    Ritz values lie inside the spectrum of H A, so these are inner estimates.
    With fewer than two steps the estimate is flagged partial.
    """
    T = lanczos_tridiagonal(report.alphas, report.betas)
    if T.shape[0] == 0:
        report.ritz = np.zeros(0)
        report.partial = True
        return math.nan, math.nan, math.nan
    theta = eig_sym(T).evals
    report.ritz = theta
    report.lambda_min, report.lambda_max = float(theta[0]), float(theta[-1])
    report.kappa = report.lambda_max / report.lambda_min if report.lambda_min > 0 else math.inf
    report.partial = T.shape[0] < 2
    return report.lambda_min, report.lambda_max, report.kappa


def default_maxit(n):
    return 100 * math.ceil(n / 1000)


def pcg(A, b, H=None, tol=1e-8, maxit=None, x0=None, x_star=None):
    """Solve A x = b by PCG; returns ``(x, SolveReport)``.

    Stops when the recursively updated residual satisfies
    ||r_k|| <= tol ||b||. Hitting ``maxit`` is reported, not raised.
    """
    A_op, H_op = as_operator(A), as_operator(H)
    b = np.asarray(b, dtype=np.float64)
    n = b.size
    maxit = default_maxit(n) if maxit is None else maxit
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    rep = SolveReport()
    if x_star is not None:
        rep.anorm_errors = []

        def record_error():
            e = x - x_star
            rep.anorm_errors.append(float(np.sqrt(max(e @ A_op(e), 0.0))))
    else:
        def record_error():
            pass

    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        bnorm = 1.0
    r = b - A_op(x) if x0 is not None else b.copy()
    z = H_op(r)
    rz = float(r @ z)
    rep.rel_residuals.append(float(np.linalg.norm(r) / bnorm))
    rep.prec_residuals.append(math.sqrt(max(rz, 0.0)))
    record_error()
    if rep.rel_residuals[-1] <= tol:
        rep.converged = True
        return x, rep
    if rz <= 0:
        raise DefinitenessError(f"preconditioner is not positive definite (r.Hr = {rz:.3e})")
    p = z.copy()
    for k in range(maxit):
        q = A_op(p)
        pq = float(p @ q)
        if not pq > 0:
            raise DefinitenessError(f"operator is not positive definite at iteration {k} (p.Ap = {pq:.3e})")
        alpha = rz / pq
        x += alpha * p
        r -= alpha * q
        rep.alphas.append(alpha)
        rep.iterations = k + 1
        z = H_op(r)
        rz_new = float(r @ z)
        rep.rel_residuals.append(float(np.linalg.norm(r) / bnorm))
        rep.prec_residuals.append(math.sqrt(max(rz_new, 0.0)))
        record_error()
        if rep.rel_residuals[-1] <= tol:
            rep.converged = True
            break
        if not rz_new > 0:
            raise DefinitenessError(f"preconditioner is not positive definite at iteration {k} (r.Hr = {rz_new:.3e})")
        beta = rz_new / rz
        rep.betas.append(beta)
        p = z + beta * p
        rz = rz_new
    ritz_spectrum(rep)
    return x, rep


def write_history(report, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "rel_residual", "anorm_error"])
        for k, res in enumerate(report.rel_residuals):
            err = report.anorm_errors[k] if report.anorm_errors is not None else ""
            w.writerow([k, repr(res), repr(err) if err != "" else ""])


def lanczos_ritz(A, n, steps=50, seed=0):
    """Ritz values of a plain Lanczos run (full reorthogonalization) on the operator A."""
    A_op = as_operator(A)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    V = [v]
    alpha, beta = [], []
    for j in range(min(steps, n)):
        w = A_op(V[-1])
        a = float(w @ V[-1])
        alpha.append(a)
        Q = np.column_stack(V)
        w -= Q @ (Q.T @ w)
        w -= Q @ (Q.T @ w)
        bnorm = np.linalg.norm(w)
        if bnorm <= 1e-14 * max(abs(a), 1.0) or j == min(steps, n) - 1:
            break
        beta.append(bnorm)
        V.append(w / bnorm)
    T = np.diag(alpha) + np.diag(beta, 1) + np.diag(beta, -1)
    return eig_sym(T).evals


class AdditiveSchwarz:
    """One-level additive Schwarz sum_s R_s^T (R_s M R_s^T)^{-1} R_s with dense local Cholesky."""

    def __init__(self, M, P):
        self.P = P
        self.n = P.n
        self.factors = []
        for s, idx in enumerate(P.domains):
            try:
                self.factors.append(cholesky(local_block(M, idx)))
            except DefinitenessError as exc:
                raise DefinitenessError(
                    f"local block of subdomain {s} is not positive definite (pivot {exc.pivot})",
                    pivot=exc.pivot) from exc

    def apply(self, x):
        x = np.asarray(x, dtype=np.float64)
        y = np.zeros_like(x)
        for idx, L in zip(self.P.domains, self.factors):
            y[idx] += solve_chol(L, x[idx])
        return y

    __call__ = apply


def one_level_as(A, P):
    return AdditiveSchwarz(sp.csr_matrix(A), P)
