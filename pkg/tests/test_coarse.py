import numpy as np
import pytest
import scipy.sparse as sp

from algebraic_schwarz.coarse import (CoarseBasis, GevpResult, build_coarse_basis, coarse_operator,
                                      dump_gevp, gevp_residuals, subdomain_gevp)
from algebraic_schwarz.linalg import DefinitenessError
from algebraic_schwarz.partition import Partition, ensure_minimal_overlap, partition_graph
from algebraic_schwarz.splitting import assemble_A_plus, build_B, split_all

from conftest import random_spd


def _pipeline(A, P):
    locs = split_all(build_B(A, P), P)
    sur = assemble_A_plus(A, locs, P)
    return locs, sur, [subdomain_gevp(loc, sur.A_plus, P) for loc in locs]


def laplace_1d(n):
    return sp.csr_matrix(sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]))


def test_single_subdomain_all_ones():
    A = laplace_1d(12)
    P = Partition(12, (np.arange(12),))
    _, _, res = _pipeline(A, P)
    assert np.allclose(res[0].evals, 1.0, atol=1e-12)
    assert build_coarse_basis(res, P, tau=10).dim == 0


def test_decoupled_subdomains_identical_operators():
    # mu == 1 on every subdomain when blocks are decoupled: left = right
    A = sp.block_diag([laplace_1d(6), laplace_1d(5)], format="csr")
    P = Partition(11, (np.arange(6), np.arange(6, 11)))
    _, _, res = _pipeline(A, P)
    for r in res:
        assert np.allclose(r.evals, 1.0, atol=1e-12)


def test_overlapping_1d_laplacian():
    A = laplace_1d(10)
    P = ensure_minimal_overlap(A, Partition(10, (np.arange(5), np.arange(5, 10))))
    locs, sur, res = _pipeline(A, P)
    # both local matrices are spd here, so A_plus = A
    assert sum(loc.k_neg for loc in locs) == 0
    for loc, r in zip(locs, res):
        assert np.all(np.diff(r.evals) >= 0)
        assert r.evals.min() >= -1e-10
        assert gevp_residuals(r, loc, sur.A_plus, P).max() <= 1e-9


def test_gevp_on_elasticity(beam_setup):
    _, P, S = beam_setup
    for loc, r in zip(S.locals, S.gevp):
        assert r.evals.min() >= -1e-10
        assert gevp_residuals(r, loc, S.A_plus, P).max() <= 1e-9
        # kernel of the left matrix contains the local negative directions
        assert r.selected(10).size >= loc.k_neg


def test_selection_monotone_in_tau(beam_setup):
    _, P, S = beam_setup
    taus = [1.5, 2.0, 10.0, 100.0, 1e4]
    # lam < 1/tau: raising tau can only shrink the selection
    for r in S.gevp:
        sets = [set(r.selected(t).tolist()) for t in taus]
        for a, b in zip(sets, sets[1:]):
            assert b <= a
    dims = [build_coarse_basis(S.gevp, P, t).n_selected for t in taus]
    assert dims == sorted(dims, reverse=True)


def test_basis_support_and_independence(beam_setup):
    _, P, S = beam_setup
    basis = S.basis
    assert basis.dim > 0
    inside = P.membership()
    for k, (s, j) in enumerate(basis.origin):
        z = basis.Z[:, k]
        assert np.all(z[~inside[:, s]] == 0.0)
        assert np.array_equal(z[P.domains[s]], S.gevp[s].evecs[:, j])
    Q = basis.Z / np.linalg.norm(basis.Z, axis=0)
    ev = np.linalg.eigvalsh(Q.T @ Q)
    assert ev.min() > 1e-10 * ev.max()


def test_no_selection_gives_empty_basis():
    P = Partition(4, (np.arange(4),))
    res = [GevpResult(s=0, evals=np.ones(4), evecs=np.eye(4))]
    basis = build_coarse_basis(res, P, tau=2.0)
    assert basis.dim == 0 and basis.Z.shape == (4, 0)
    with pytest.raises(ValueError):
        coarse_operator(basis, sp.identity(4))


def test_duplicate_vector_counted_once():
    P = Partition(4, (np.arange(4), np.arange(4)))
    y = np.array([[1.0, 2.0, 0.0, -1.0]]).T
    res = [GevpResult(s=s, evals=np.array([0.0]), evecs=y) for s in range(2)]
    basis = build_coarse_basis(res, P, tau=10)
    assert basis.n_selected == 2 and basis.dim == 1 and basis.dropped == 1


def test_tau_must_exceed_one():
    with pytest.raises(ValueError):
        build_coarse_basis([], Partition(1, ([0],)), tau=1.0)


def test_coarse_operator_dim_one(rng):
    A = random_spd(8, rng)
    v = rng.standard_normal(8)
    L = coarse_operator(CoarseBasis(tau=2, Z=v[:, None]), A)
    assert np.allclose(L @ L.T, [[v @ A @ v]], rtol=1e-14)


def test_coarse_operator_orthonormal_basis(rng):
    A = random_spd(10, rng)
    w, U = np.linalg.eigh(A)
    Z = U[:, :4] / np.sqrt(w[:4])          # A-orthonormal columns
    L = coarse_operator(CoarseBasis(tau=2, Z=Z), A)
    assert np.abs(L @ L.T - np.eye(4)).max() <= 1e-12


def test_coarse_operator_triple_product(rng):
    A = random_spd(50, rng)
    Z = rng.standard_normal((50, 5))
    L = coarse_operator(CoarseBasis(tau=2, Z=Z), A)
    ref = Z.T @ A @ Z
    assert np.abs(L @ L.T - ref).max() <= 1e-12 * np.abs(ref).max()


def test_coarse_operator_dependent_basis_fails(rng):
    A = random_spd(6, rng)
    v = rng.standard_normal(6)
    with pytest.raises(DefinitenessError, match="tighten"):
        coarse_operator(CoarseBasis(tau=2, Z=np.column_stack([v, v])), A)


def test_dump_gevp(tmp_path, beam_setup):
    _, _, S = beam_setup
    dump_gevp(S.gevp, tmp_path / "g.csv")
    rows = (tmp_path / "g.csv").read_text().splitlines()
    assert rows[0] == "s,k,lambda" and len(rows) == 1 + sum(r.evals.size for r in S.gevp)
