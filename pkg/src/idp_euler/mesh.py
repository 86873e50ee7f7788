"""Discrete graphs of continuous Q1 elements on uniform 1D and 2D grids.

A graph stores, for every node ``i``, the off-diagonal part of its stencil in
compressed rows: edge ``e`` runs from ``row[e]`` to ``col[e]`` and carries
``c_ij = int phi_i grad phi_j`` and the consistent mass ``m_ij``. Diagonal
entries ``c_ii`` and ``m_ii`` live in per-node arrays. ``mirror[e]`` is the
edge going the other way, used when a pairwise quantity must be symmetric.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

# boundary side flags, combined bitwise at corners
LEFT, RIGHT, BOTTOM, TOP = 1, 2, 4, 8
SIDES = {"left": LEFT, "right": RIGHT, "bottom": BOTTOM, "top": TOP}


@dataclass(frozen=True)
class DiscreteGraph:
    dim: int
    x: np.ndarray           # (N, d) node coordinates
    row_ptr: np.ndarray     # (N + 1,)
    row: np.ndarray         # (E,)
    col: np.ndarray         # (E,)
    mirror: np.ndarray      # (E,)
    c: np.ndarray           # (E, d)
    mass_ij: np.ndarray     # (E,)
    c_diag: np.ndarray      # (N, d)
    mass_diag: np.ndarray   # (N,)
    lumped: np.ndarray      # (N,)
    tags: np.ndarray        # (N,) bitwise OR of boundary side flags
    measure: float
    periodic: bool = False

    @property
    def n_nodes(self) -> int:
        return self.lumped.size

    @property
    def n_edges(self) -> int:
        return self.col.size

    @property
    def boundary(self) -> np.ndarray:
        return self.tags != 0

    @property
    def c_norm(self) -> np.ndarray:
        return normalize(self.c)[0]

    @property
    def normals(self) -> np.ndarray:
        return normalize(self.c)[1]

    @property
    def n_neighbors(self) -> np.ndarray:
        return np.diff(self.row_ptr)

    @property
    def h(self) -> float:
        """Typical mesh size, ``(|D| / N)^(1/d)``."""
        return (self.measure / self.n_nodes) ** (1.0 / self.dim)

    def row_sum(self, values):
        """Sum of edge values over each row (off-diagonal part)."""
        return np.add.reduceat(values, self.row_ptr[:-1], axis=0)

    def check(self, tol=1e-12):
        """Assert the structural invariants; returns self for chaining."""
        c_sum = self.row_sum(self.c) + self.c_diag
        scale = np.max(np.abs(self.c))
        assert np.all(np.abs(c_sum) <= tol * scale), "c_ij rows must sum to zero"
        both = ~(self.boundary[self.row] & self.boundary[self.col])
        assert np.allclose(self.c[both], -self.c[self.mirror][both], atol=tol * scale, rtol=0), \
            "c_ij must be antisymmetric away from the boundary"
        m_sum = self.row_sum(self.mass_ij) + self.mass_diag
        assert np.allclose(m_sum, self.lumped, rtol=tol, atol=0), "rows of m_ij must sum to m_i"
        assert np.all(self.lumped > 0), "lumped masses must be positive"
        assert np.isclose(self.lumped.sum(), self.measure, rtol=tol), "masses must add up to |D|"
        assert np.all(self.col[self.mirror] == self.row)
        return self


def normalize(c):
    """``(|c_ij|, n_ij)``; zero vectors get a zero normal and drop out of the viscosity."""
    c = np.asarray(c, dtype=float)
    norm = np.sqrt(np.sum(c * c, axis=-1))
    with np.errstate(invalid="ignore", divide="ignore"):
        n = np.where(norm[..., None] > 0, c / norm[..., None], 0.0)
    return norm, n


def _matrices_1d(n_cells, length, periodic):
    """Consistent mass, lumped mass and c-matrix of hat functions on a uniform grid."""
    h = length / n_cells
    n = n_cells if periodic else n_cells + 1
    a = np.arange(n_cells)
    b = (a + 1) % n
    rows = np.concatenate([a, a, b, b])
    cols = np.concatenate([a, b, a, b])
    mass = np.concatenate([np.full(n_cells, h / 3), np.full(n_cells, h / 6),
                           np.full(n_cells, h / 6), np.full(n_cells, h / 3)])
    # int phi_a phi_b' over one cell is (h/2) * (+-1/h)
    cmat = np.concatenate([np.full(n_cells, -0.5), np.full(n_cells, 0.5),
                           np.full(n_cells, -0.5), np.full(n_cells, 0.5)])
    M = sp.coo_matrix((mass, (rows, cols)), shape=(n, n)).tocsr()
    C = sp.coo_matrix((cmat, (rows, cols)), shape=(n, n)).tocsr()
    return M, C


def _from_matrices(dim, x, M, Cs, tags, periodic):
    M = sp.csr_matrix(M)
    M.eliminate_zeros()  # kron returns dense blocks with stored zeros
    M.sort_indices()
    N = M.shape[0]
    pattern = M.tocoo()
    keep = pattern.row != pattern.col
    row = pattern.row[keep].astype(np.int64)
    col = pattern.col[keep].astype(np.int64)
    order = np.lexsort((col, row))
    row, col = row[order], col[order]
    mass_ij = np.asarray(M[row, col]).ravel()
    c = np.stack([np.asarray(C.tocsr()[row, col]).ravel() for C in Cs], axis=-1)
    c_diag = np.stack([C.diagonal() for C in Cs], axis=-1)
    row_ptr = np.zeros(N + 1, dtype=np.int64)
    np.add.at(row_ptr, row + 1, 1)
    row_ptr = np.cumsum(row_ptr)
    key = row * N + col
    mirror = np.searchsorted(key, col * N + row)
    lumped = np.asarray(M.sum(axis=1)).ravel()
    return DiscreteGraph(dim=dim, x=x, row_ptr=row_ptr, row=row, col=col, mirror=mirror,
                         c=c, mass_ij=mass_ij, c_diag=c_diag, mass_diag=M.diagonal(),
                         lumped=lumped, tags=tags, measure=float(lumped.sum()),
                         periodic=periodic).check()


def build_1d(n_cells, x_left=0.0, x_right=1.0, periodic=False) -> DiscreteGraph:
    """Uniform grid of ``n_cells`` Q1 elements on ``[x_left, x_right]``.

    With ``periodic=True`` the last node is identified with the first, so the
    graph has ``n_cells`` nodes and no boundary.
    """
    if n_cells < 2:
        raise ValueError("need at least two cells")
    if not x_right > x_left:
        raise ValueError("degenerate extent")
    M, C = _matrices_1d(n_cells, x_right - x_left, periodic)
    n = M.shape[0]
    x = (x_left + (x_right - x_left) * np.arange(n) / n_cells)[:, None]
    tags = np.zeros(n, dtype=np.int64)
    if not periodic:
        tags[0], tags[-1] = LEFT, RIGHT
    return _from_matrices(1, x, M, [C], tags, periodic)


def build_2d(nx, ny, extent) -> DiscreteGraph:
    """Uniform ``nx`` by ``ny`` grid of Q1 elements on ``extent = (x0, x1, y0, y1)``.

    Nodes are numbered ``ix + (nx + 1) * iy``; all matrices are tensor
    products of their 1D counterparts.
    """
    if nx < 2 or ny < 2:
        raise ValueError("need at least two cells per direction")
    x0, x1, y0, y1 = map(float, extent)
    if not (x1 > x0 and y1 > y0):
        raise ValueError("degenerate extent")
    Mx, Cx = _matrices_1d(nx, x1 - x0, False)
    My, Cy = _matrices_1d(ny, y1 - y0, False)
    M = sp.kron(My, Mx)
    Cs = [sp.kron(My, Cx), sp.kron(Cy, Mx)]
    ix, iy = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1))
    ix, iy = ix.ravel(), iy.ravel()
    x = np.stack([x0 + (x1 - x0) * ix / nx, y0 + (y1 - y0) * iy / ny], axis=-1)
    tags = ((ix == 0) * LEFT | (ix == nx) * RIGHT
            | (iy == 0) * BOTTOM | (iy == ny) * TOP).astype(np.int64)
    return _from_matrices(2, x, M, Cs, tags, False)
