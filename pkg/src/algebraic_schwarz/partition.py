"""Algebraic partitions of the index set {0..n-1} with minimal overlap.

A :class:`Partition` stores the subdomain index sets; restriction operators
are never formed as matrices, a subdomain's sorted index array doubles as its
local-to-global map.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import shortest_path


class PartitionError(ValueError):
    pass


@dataclass(frozen=True)
class Partition:
    n: int
    domains: tuple
    multiplicity: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        doms = tuple(np.unique(np.asarray(d, dtype=np.int64)) for d in self.domains)
        object.__setattr__(self, "domains", doms)
        mu = np.zeros(self.n, dtype=np.int64)
        for d in doms:
            if d.size and (d[0] < 0 or d[-1] >= self.n):
                raise PartitionError("subdomain index out of range")
            mu[d] += 1
        object.__setattr__(self, "multiplicity", mu)

    @property
    def N(self):
        return len(self.domains)

    @property
    def sizes(self):
        return np.array([d.size for d in self.domains], dtype=np.int64)

    @property
    def overlap_excess(self):
        """sum_s n^s - n."""
        return int(self.sizes.sum() - self.n)

    def is_cover(self):
        return bool(np.all(self.multiplicity >= 1))

    def is_disjoint(self):
        return bool(np.all(self.multiplicity == 1))

    def global_to_local(self, s):
        g2l = np.full(self.n, -1, dtype=np.int64)
        g2l[self.domains[s]] = np.arange(self.domains[s].size)
        return g2l

    def membership(self):
        """Dense boolean n x N matrix, entry (i, s) true iff i is in domain s."""
        M = np.zeros((self.n, self.N), dtype=bool)
        for s, d in enumerate(self.domains):
            M[d, s] = True
        return M

    def membership_sparse(self):
        rows = np.concatenate([d for d in self.domains]) if self.N else np.zeros(0, dtype=np.int64)
        cols = np.concatenate([np.full(d.size, s) for s, d in enumerate(self.domains)]) if self.N else rows
        return sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(self.n, self.N))

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return self.n == other.n and self.N == other.N and all(
            np.array_equal(a, b) for a, b in zip(self.domains, other.domains))


def _graph(A):
    G = sp.csr_matrix(A)
    G = sp.csr_matrix((np.ones(G.nnz), G.indices, G.indptr), shape=G.shape)
    G = G + G.T
    G.setdiag(0)
    G.eliminate_zeros()
    G.sort_indices()
    return G


def coupling_pairs(A):
    """Upper-triangular (i < j) coordinates of the stored off-diagonal nonzeros of ``A``."""
    C = sp.triu(sp.csr_matrix(A), k=1, format="coo")
    keep = C.data != 0
    return C.row[keep].astype(np.int64), C.col[keep].astype(np.int64)


def uncovered_pairs(A, P):
    """All stored nonzeros (i, j), i < j, with no subdomain containing both endpoints."""
    i, j = coupling_pairs(A)
    M = P.membership()
    covered = (M[i] & M[j]).any(axis=1)
    return list(zip(i[~covered].tolist(), j[~covered].tolist()))


def has_minimal_overlap(A, P):
    return P.is_cover() and not uncovered_pairs(A, P)


# ---------------------------------------------------------------------------
# graph growing
# ---------------------------------------------------------------------------

def _bfs_dist(G, src):
    d = shortest_path(G, method="D", unweighted=True, indices=[src])[0]
    return d


def _pick_seeds(G, N, rng):
    n = G.shape[0]
    start = int(rng.integers(n))
    d = _bfs_dist(G, start)
    finite = np.where(np.isfinite(d), d, -1.0)
    first = int(np.argmax(finite))
    seeds = [first]
    dists = [_bfs_dist(G, first)]
    mind = dists[0].copy()
    while len(seeds) < N:
        cand = np.where(np.isinf(mind), np.inf, mind)
        cand[seeds] = -1.0
        # unreachable vertices first: they start their own component
        nxt = int(np.argmax(cand))
        seeds.append(nxt)
        dists.append(_bfs_dist(G, nxt))
        mind = np.minimum(mind, dists[-1])
    return seeds, dists


def partition_graph(A, N, seed=0, imbalance=0.03, refine_passes=10):
    """Split the sparsity graph of ``A`` into ``N`` disjoint classes.

    Seeds are spread by farthest-point BFS, classes grow greedily (the
    currently smallest class takes the frontier vertex with most edges into
    it, ties broken by distance to the class seed), and a boundary pass then
    moves vertices that reduce the edge cut without breaking the balance.
    Deterministic in ``(A, N, seed)``.
    """
    n = A.shape[0]
    if N < 1:
        raise PartitionError("N must be at least 1")
    if N > n:
        raise PartitionError(f"cannot split {n} indices into {N} nonempty classes")
    if N == 1:
        return Partition(n, (np.arange(n),))
    G = _graph(A)
    indptr, indices = G.indptr, G.indices
    rng = np.random.default_rng(seed)
    seeds, dists = _pick_seeds(G, N, rng)

    part = np.full(n, -1, dtype=np.int64)
    size = np.zeros(N, dtype=np.int64)
    conn = [dict() for _ in range(N)]
    heaps = [[] for _ in range(N)]

    def assign(v, c):
        part[v] = c
        size[c] += 1
        for u in indices[indptr[v]:indptr[v + 1]]:
            if part[u] < 0:
                k = conn[c].get(u, 0) + 1
                conn[c][u] = k
                heapq.heappush(heaps[c], (-k, dists[c][u], int(u)))

    for c, s in enumerate(seeds):
        assign(s, c)

    remaining = n - N
    while remaining:
        order = np.lexsort((np.arange(N), size))
        grew = False
        for c in order:
            h = heaps[c]
            while h:
                negk, _, v = heapq.heappop(h)
                if part[v] < 0 and conn[c].get(v, 0) == -negk:
                    assign(v, c)
                    remaining -= 1
                    grew = True
                    break
            if grew:
                break
        if not grew:
            # disconnected leftovers: hand the lowest free index to the smallest class
            v = int(np.flatnonzero(part < 0)[0])
            c = int(order[0])
            assign(v, c)
            remaining -= 1

    _refine(indptr, indices, part, size, N, imbalance, refine_passes)
    return Partition(n, tuple(np.flatnonzero(part == c) for c in range(N)))


def _refine(indptr, indices, part, size, N, imbalance, passes):
    n = part.size
    target = n / N
    max_size = math.floor(target * (1 + imbalance)) if N > 1 else n
    max_size = max(max_size, math.ceil(target))
    for _ in range(passes):
        moved = 0
        for v in range(n):
            nb = indices[indptr[v]:indptr[v + 1]]
            if nb.size == 0:
                continue
            own = part[v]
            counts = np.bincount(part[nb], minlength=N)
            if counts[own] == nb.size or size[own] <= 1:
                continue
            internal = counts[own]
            best, best_key = -1, None
            for t in np.flatnonzero(counts):
                if t == own or size[t] + 1 > max_size:
                    continue
                gain = counts[t] - internal
                if gain > 0 or (gain == 0 and size[own] > size[t] + 1):
                    key = (gain, -size[t])
                    if best_key is None or key > best_key:
                        best, best_key = t, key
            if best >= 0:
                part[v] = best
                size[own] -= 1
                size[best] += 1
                moved += 1
        if not moved:
            break


def ensure_minimal_overlap(A, P):
    """Extend disjoint classes so every nonzero A_ij lies inside some subdomain.

    For each coupling i in class s, j in class t with s < t, index j joins
    subdomain s.
    """
    if not P.is_cover():
        raise PartitionError("classes do not cover all indices")
    owner = np.full(P.n, -1, dtype=np.int64)
    for s, d in enumerate(P.domains):
        owner[d] = np.where(owner[d] < 0, s, owner[d])
    i, j = coupling_pairs(A)
    si, sj = owner[i], owner[j]
    cross = si != sj
    i, j, si, sj = i[cross], j[cross], si[cross], sj[cross]
    lo = np.minimum(si, sj)
    add = np.where(si < sj, j, i)
    doms = []
    for s, d in enumerate(P.domains):
        extra = add[lo == s]
        doms.append(np.union1d(d, extra))
    Q = Partition(P.n, tuple(doms))
    bad = uncovered_pairs(A, Q)
    if bad:
        raise PartitionError(f"overlap extension left {len(bad)} uncovered couplings, e.g. {bad[0]}")
    return Q


def regular_partition(node_ij, grid_dims, N, A=None):
    """Checkerboard partition of a structured grid of ``grid_dims = (nx, ny)`` elements.

    ``node_ij`` gives the integer node coordinates (ix, iy) of every index
    (0 <= ix <= nx, 0 <= iy <= ny). The element grid is cut into
    sqrt(N) x sqrt(N) equal blocks; a node on a block interface goes to the
    lower block. With ``A`` given, :func:`ensure_minimal_overlap` is applied.
    """
    k = math.isqrt(N)
    if k * k != N:
        raise PartitionError(f"N={N} is not a perfect square")
    nx, ny = grid_dims
    if nx % k or ny % k:
        raise PartitionError(f"grid {nx}x{ny} is not divisible into {k}x{k} blocks")
    node_ij = np.asarray(node_ij, dtype=np.int64)
    bx = np.maximum((node_ij[:, 0] * k + nx - 1) // nx - 1, 0)
    by = np.maximum((node_ij[:, 1] * k + ny - 1) // ny - 1, 0)
    label = by * k + bx
    P = Partition(node_ij.shape[0], tuple(np.flatnonzero(label == c) for c in range(N)))
    if any(d.size == 0 for d in P.domains):
        raise PartitionError("regular partition produced an empty subdomain")
    return ensure_minimal_overlap(A, P) if A is not None else P


def coloring_bound(A_plus, P):
    """Greedy color count of the subdomain interaction graph.

    Subdomains s and t interact when they share an index or a nonzero of
    ``A_plus`` couples them. The greedy (largest-degree-first) count is an
    upper bound on the minimal number of colors.
    """
    if P.N <= 1:
        return P.N
    M = P.membership_sparse()
    pattern = sp.csr_matrix(A_plus, copy=True)
    pattern.data = np.ones_like(pattern.data)
    C = (M.T @ (pattern @ M)) + M.T @ M
    C = sp.csr_matrix(C)
    C.setdiag(0)
    C.eliminate_zeros()
    deg = np.diff(C.indptr)
    order = sorted(range(P.N), key=lambda s: (-deg[s], s))
    color = np.full(P.N, -1, dtype=np.int64)
    for s in order:
        used = {int(color[t]) for t in C.indices[C.indptr[s]:C.indptr[s + 1]] if color[t] >= 0}
        c = 0
        while c in used:
            c += 1
        color[s] = c
    return int(color.max() + 1)
