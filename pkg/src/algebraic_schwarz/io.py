"""File formats: Matrix Market matrices, plain-text vectors, partitions, JSON reports."""
from __future__ import annotations

import json
import math
import os

import numpy as np
import scipy.io
import scipy.sparse as sp

from .linalg import sparse_sym
from .partition import Partition, PartitionError

REPORT_SCHEMA = 1


def write_matrix_market(path, A, comment=""):
    """Symmetric, real, coordinate format with 1-based indices (lower triangle stored)."""
    scipy.io.mmwrite(str(path), sp.csr_matrix(A), comment=comment, field="real", symmetry="symmetric")


def read_matrix_market(path):
    if not os.path.isfile(path):
        raise FileNotFoundError(f"no such matrix file: {path}")
    A = scipy.io.mmread(str(path))
    if not sp.issparse(A):
        A = sp.csr_matrix(A)
    return sparse_sym(A)


def write_vector(path, x):
    np.savetxt(str(path), np.asarray(x, dtype=np.float64), fmt="%.17g")


def read_vector(path):
    return np.atleast_1d(np.loadtxt(str(path), dtype=np.float64))


def write_partition(path, P):
    """Line 1: ``N n``; then ``s n_s i_1 ... i_{n_s}`` per subdomain, 0-based indices."""
    with open(path, "w") as fh:
        fh.write(f"{P.N} {P.n}\n")
        for s, d in enumerate(P.domains):
            fh.write(" ".join([str(s), str(d.size)] + [str(int(i)) for i in d]) + "\n")


def read_partition(path):
    with open(path) as fh:
        lines = [ln.split() for ln in fh if ln.strip()]
    if not lines or len(lines[0]) != 2:
        raise PartitionError(f"{path}: malformed header")
    N, n = int(lines[0][0]), int(lines[0][1])
    if len(lines) - 1 != N:
        raise PartitionError(f"{path}: header announces {N} subdomains, found {len(lines) - 1}")
    domains = [None] * N
    for tok in lines[1:]:
        s, ns = int(tok[0]), int(tok[1])
        idx = np.array([int(t) for t in tok[2:]], dtype=np.int64)
        if idx.size != ns:
            raise PartitionError(f"{path}: subdomain {s} announces {ns} indices, found {idx.size}")
        if not 0 <= s < N or domains[s] is not None:
            raise PartitionError(f"{path}: bad or repeated subdomain id {s}")
        domains[s] = idx
    return Partition(n, tuple(domains))


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def write_json(path, data):
    payload = {"schema": REPORT_SCHEMA, **data}
    with open(path, "w") as fh:
        json.dump(_clean(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)
