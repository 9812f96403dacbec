import numpy as np
import pytest
import scipy.sparse as sp

from algebraic_schwarz.cli import make_partition
from algebraic_schwarz.partition import Partition, ensure_minimal_overlap, partition_graph
from algebraic_schwarz.precond import setup_preconditioner
from algebraic_schwarz.problems import (ElasticityConfig, coefficient_field_testcase1, elasticity_2d,
                                        testcase1, testcase2)

# lines printed at the end of the run by pytest_terminal_summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


# ---------------------------------------------------------------------------
# small synthetic inputs
# ---------------------------------------------------------------------------

def random_spd(n, rng, cond=100.0):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    d = np.geomspace(1.0, cond, n)
    return (Q * d) @ Q.T


def random_sparse_spd(n, rng, density=0.08):
    """Diagonally dominant random sparse spd matrix with a connected band."""
    M = sp.random(n, n, density=density, random_state=rng, format="csr")
    M.data -= 0.5
    M = M + M.T
    M = M + sp.diags(-np.ones(n - 1), 1) + sp.diags(-np.ones(n - 1), -1)
    rowsum = np.asarray(abs(M).sum(axis=1)).ravel()
    M = M + sp.diags(rowsum + 1.0)
    M = sp.csr_matrix(0.5 * (M + M.T))
    M.sort_indices()
    return M


def random_overlapping_partition(A, N, rng, extra=0.1):
    """Random disjoint classes, minimal overlap, plus a few random extra memberships."""
    n = A.shape[0]
    label = rng.permutation(np.arange(n) % N)
    P = ensure_minimal_overlap(A, Partition(n, tuple(np.flatnonzero(label == s) for s in range(N))))
    doms = [d for d in P.domains]
    for _ in range(int(extra * n)):
        s = int(rng.integers(N))
        doms[s] = np.union1d(doms[s], [int(rng.integers(n))])
    return Partition(n, tuple(doms))


def small_elasticity(nx=12, ny=6, rhs="manufactured", seed=0):
    """Layered beam with the testcase-1 coefficient jump at oracle scale (n = 168 by default)."""
    cfg = ElasticityConfig(Lx=2.0, Ly=1.0, nx=nx, ny=ny, E_field=coefficient_field_testcase1,
                           rhs=rhs, seed=seed)
    return elasticity_2d(cfg, name="small-beam")


def dense(op, n):
    return np.column_stack([op(e) for e in np.eye(n)])


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture(scope="session")
def beam():
    return small_elasticity()


@pytest.fixture(scope="session")
def beam_setup(beam):
    P = ensure_minimal_overlap(beam.A, partition_graph(beam.A, 3, seed=0))
    return beam, P, setup_preconditioner(beam.A, P, tau=10.0)


# ---------------------------------------------------------------------------
# full-size configurations, built once per session
# ---------------------------------------------------------------------------

@pytest.fixture(scope="session")
def tc1():
    prob = testcase1(rhs="manufactured", seed=0)
    P = make_partition(prob, 4, "graph")
    return prob, P, setup_preconditioner(prob.A, P, tau=10.0)


@pytest.fixture(scope="session")
def tc2_regular():
    prob = testcase2(rhs="manufactured", seed=0)
    P = make_partition(prob, 16, "regular")
    return prob, P, setup_preconditioner(prob.A, P, tau=10.0)


@pytest.fixture(scope="session")
def tc2_graph():
    prob = testcase2(rhs="manufactured", seed=0)
    P = make_partition(prob, 16, "graph")
    return prob, P, setup_preconditioner(prob.A, P, tau=10.0)
