"""Test matrices: P1 plane elasticity on structured rectangles and a 5-point Laplacian."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .linalg import symmetrize


def coefficient_field_testcase1(x, y):
    """Young's modulus of the layered beam: 1e8 on three horizontal bands, 1e3 elsewhere.

    Band edges are closed intervals, so y = 3/7 is inside a stiff band.
    """
    y = np.asarray(y, dtype=np.float64)
    stiff = np.zeros(y.shape, dtype=bool)
    for a, b in ((1, 2), (3, 4), (5, 6)):
        stiff |= (y >= a / 7) & (y <= b / 7)
    return np.where(stiff, 1e8, 1e3)


def constant_field(value):
    def E(x, y):
        return np.full(np.shape(x), float(value))
    return E


@dataclass
class ElasticityConfig:
    Lx: float = 1.0
    Ly: float = 1.0
    nx: int = 8
    ny: int = 8
    E_field: Callable = field(default_factory=lambda: constant_field(1.0))
    nu: float = 0.3
    clamped: str = "left"          # "left" clamps the x = 0 edge, "none" keeps all dofs
    plane: str = "stress"
    rhs: str = "body"              # "body" (unit downward load) or "manufactured"
    seed: int = 0

    def validate(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError("nx and ny must be at least 1")
        if not 0.0 < self.nu < 0.5:
            raise ValueError("Poisson ratio must lie in (0, 0.5)")
        if self.Lx <= 0 or self.Ly <= 0:
            raise ValueError("domain extents must be positive")
        if self.clamped not in ("left", "none"):
            raise ValueError(f"unknown boundary condition {self.clamped!r}")
        if self.plane not in ("stress", "strain"):
            raise ValueError(f"unknown plane model {self.plane!r}")
        if self.rhs not in ("body", "manufactured"):
            raise ValueError(f"unknown right-hand side {self.rhs!r}")


@dataclass
class GeneratedProblem:
    A: sp.csr_matrix
    b: np.ndarray
    x_star: Optional[np.ndarray] = None
    coords: Optional[np.ndarray] = None    # per-index physical coordinates of the carrying node
    node_ij: Optional[np.ndarray] = None   # per-index integer grid coordinates
    dof_map: Optional[np.ndarray] = None   # per-index global dof before elimination
    grid_dims: Optional[tuple] = None      # element (or cell) counts (nx, ny)
    name: str = ""


def elasticity_matrix(E, nu, plane="stress"):
    if plane == "stress":
        c = E / (1.0 - nu * nu)
        return c * np.array([[1.0, nu, 0.0], [nu, 1.0, 0.0], [0.0, 0.0, 0.5 * (1.0 - nu)]])
    c = E / ((1.0 + nu) * (1.0 - 2.0 * nu))
    return c * np.array([[1.0 - nu, nu, 0.0], [nu, 1.0 - nu, 0.0], [0.0, 0.0, 0.5 - nu]])


def p1_element_stiffness(xy, E, nu, plane="stress"):
    """6x6 stiffness of a linear triangle with vertices ``xy`` (3x2), dofs (u1,v1,u2,v2,u3,v3)."""
    xy = np.asarray(xy, dtype=np.float64)
    return _element_stiffness(xy[None], np.array([E], dtype=np.float64), nu, plane)[0]


def _element_stiffness(xy, E, nu, plane):
    x, y = xy[:, :, 0], xy[:, :, 1]
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    area2 = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    if np.any(area2 <= 0):
        raise ValueError("degenerate or clockwise triangle")
    m = xy.shape[0]
    B = np.zeros((m, 3, 6))
    B[:, 0, 0::2] = b
    B[:, 1, 1::2] = c
    B[:, 2, 0::2] = c
    B[:, 2, 1::2] = b
    B /= area2[:, None, None]
    D0 = elasticity_matrix(1.0, nu, plane)
    K = np.einsum("eki,kl,elj->eij", B, D0, B)
    K = 0.5 * (K + K.transpose(0, 2, 1))
    return K * (0.5 * area2 * E)[:, None, None]


def structured_triangles(Lx, Ly, nx, ny):
    """Nodes and counter-clockwise triangles; each cell is cut along its lower-left/upper-right diagonal."""
    ix, iy = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="xy")
    node_ij = np.column_stack([ix.ravel(), iy.ravel()])
    pts = node_ij * np.array([Lx / nx, Ly / ny])
    cx, cy = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    p00 = (cy * (nx + 1) + cx).ravel()
    p10, p01 = p00 + 1, p00 + nx + 1
    p11 = p01 + 1
    tris = np.concatenate([np.column_stack([p00, p10, p11]), np.column_stack([p00, p11, p01])])
    return pts, node_ij, tris


def assemble_elasticity(cfg: ElasticityConfig):
    """Full (unconstrained) stiffness, body-force load, nodes, node grid indices."""
    cfg.validate()
    pts, node_ij, tris = structured_triangles(cfg.Lx, cfg.Ly, cfg.nx, cfg.ny)
    xy = pts[tris]
    centroid = xy.mean(axis=1)
    E = np.asarray(cfg.E_field(centroid[:, 0], centroid[:, 1]), dtype=np.float64)
    if np.any(E <= 0):
        raise ValueError("Young's modulus must be positive")
    Ke = _element_stiffness(xy, E, cfg.nu, cfg.plane)
    dofs = np.empty((tris.shape[0], 6), dtype=np.int64)
    dofs[:, 0::2] = 2 * tris
    dofs[:, 1::2] = 2 * tris + 1
    rows = np.repeat(dofs, 6, axis=1).ravel()
    cols = np.tile(dofs, (1, 6)).ravel()
    ndof = 2 * pts.shape[0]
    K = sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(ndof, ndof)).tocsr()
    K = symmetrize(K)
    # unit downward body force, lumped equally on the three vertices
    e1, e2 = xy[:, 1] - xy[:, 0], xy[:, 2] - xy[:, 0]
    area = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    f = np.zeros(ndof)
    np.add.at(f, 2 * tris + 1, -np.repeat(area[:, None] / 3.0, 3, axis=1))
    return K, f, pts, node_ij


def elasticity_2d(cfg: ElasticityConfig, name=""):
    K, f, pts, node_ij = assemble_elasticity(cfg)
    ndof = K.shape[0]
    node_of = np.arange(ndof) // 2
    if cfg.clamped == "left":
        keep = node_ij[node_of, 0] > 0
    else:
        keep = np.ones(ndof, dtype=bool)
    free = np.flatnonzero(keep)
    A = K[free][:, free]
    A.eliminate_zeros()
    A.sort_indices()
    if cfg.rhs == "manufactured":
        rng = np.random.default_rng(cfg.seed)
        x_star = rng.standard_normal(free.size)
        b = A @ x_star
    else:
        x_star, b = None, f[free]
    return GeneratedProblem(A=A, b=b, x_star=x_star, coords=pts[node_of[free]],
                            node_ij=node_ij[node_of[free]], dof_map=free,
                            grid_dims=(cfg.nx, cfg.ny), name=name)


def testcase1(rhs="body", seed=0, nx=112, ny=28):
    """Layered beam on [0,4]x[0,1], clamped at x = 0; 6496 dofs at the default resolution."""
    cfg = ElasticityConfig(Lx=4.0, Ly=1.0, nx=nx, ny=ny, E_field=coefficient_field_testcase1,
                           nu=0.3, rhs=rhs, seed=seed)
    return elasticity_2d(cfg, name="testcase1")


def testcase2(rhs="body", seed=0, nx=56, ny=56):
    """Homogeneous unit square (E = 1e8, nu = 0.3), clamped at x = 0."""
    cfg = ElasticityConfig(Lx=1.0, Ly=1.0, nx=nx, ny=ny, E_field=constant_field(1e8),
                           nu=0.3, rhs=rhs, seed=seed)
    return elasticity_2d(cfg, name="testcase2")


def _dirichlet_1d(m, h):
    return sp.diags([-np.ones(m - 1), 2 * np.ones(m), -np.ones(m - 1)], [-1, 0, 1]) / (h * h)


def laplacian_2d(nx, ny, rhs="ones", seed=0):
    """5-point Dirichlet Laplacian on an nx x ny interior grid of the unit square.

    Spacing is 1/(nx+1) and 1/(ny+1). A direction with a single grid line is
    treated as absent, so a 1 x k grid gives the 1-D three-point operator.
    """
    if nx < 1 or ny < 1:
        raise ValueError("grid must have at least one point per direction")
    Tx = _dirichlet_1d(nx, 1.0 / (nx + 1)) if nx > 1 else sp.csr_matrix((1, 1))
    Ty = _dirichlet_1d(ny, 1.0 / (ny + 1)) if ny > 1 else sp.csr_matrix((1, 1))
    A = sp.kron(sp.identity(ny), Tx) + sp.kron(Ty, sp.identity(nx))
    A = symmetrize(A)
    A.eliminate_zeros()
    ix, iy = np.meshgrid(np.arange(1, nx + 1), np.arange(1, ny + 1), indexing="xy")
    node_ij = np.column_stack([ix.ravel(), iy.ravel()])
    n = nx * ny
    if rhs == "manufactured":
        x_star = np.random.default_rng(seed).standard_normal(n)
        b = A @ x_star
    else:
        x_star, b = None, np.ones(n)
    return GeneratedProblem(A=A, b=b, x_star=x_star,
                            coords=node_ij / np.array([nx + 1.0, ny + 1.0]),
                            node_ij=node_ij, dof_map=np.arange(n), grid_dims=(nx + 1, ny + 1),
                            name=f"laplacian{nx}x{ny}")
