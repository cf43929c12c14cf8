"""Graph container, symmetric normalization and the small linear-algebra kernels.

Sparse matrices are ``scipy.sparse.csr_matrix`` in canonical form (sorted
indices, no explicit zeros, float64).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .exceptions import ValidationError

ORIGINS = ("original", "homophily-half", "heterophily-half", "combined")

#: largest side accepted by the dense (verification-only) eigensolver
DENSE_EIG_CAP = 2000


def canonical_edges(edges, n_nodes: Optional[int] = None) -> np.ndarray:
    """Return an ``(m, 2)`` int64 array of unique undirected edges with ``i < j``.

    Self-loops are dropped. Rows are sorted lexicographically.
    """
    e = np.asarray(edges, dtype=np.int64)
    if e.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    e = e.reshape(-1, 2)
    if n_nodes is not None and (e.min() < 0 or e.max() >= n_nodes):
        raise ValidationError(f"edge endpoint out of range [0, {n_nodes})")
    e = np.sort(e, axis=1)
    e = e[e[:, 0] != e[:, 1]]
    return np.unique(e, axis=0)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Graph:
    """Undirected attributed graph.

    Build with :meth:`Graph.build`, which canonicalizes the edge list. The
    stored arrays are read-only.
    """

    n_nodes: int
    edges: np.ndarray
    features: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ValidationError("graph needs at least one node")
        e = self.edges
        if e.ndim != 2 or e.shape[1] != 2:
            raise ValidationError("edges must have shape (m, 2)")
        if len(e):
            if np.any(e[:, 0] >= e[:, 1]):
                raise ValidationError("edges must be canonical (i < j, no self-loops); use Graph.build")
            if e.max() >= self.n_nodes:
                raise ValidationError("edge endpoint out of range")
            if len(np.unique(e, axis=0)) != len(e):
                raise ValidationError("duplicate edges")
        if self.features.ndim != 2 or self.features.shape[0] != self.n_nodes:
            raise ValidationError(
                f"feature matrix must have {self.n_nodes} rows, got shape {self.features.shape}"
            )
        if self.labels is not None:
            if self.labels.shape != (self.n_nodes,):
                raise ValidationError(f"label vector must have length {self.n_nodes}")
            if len(self.labels) and self.labels.min() < 0:
                raise ValidationError("class ids must be non-negative")

    @classmethod
    def build(cls, n_nodes, edges, features, labels=None) -> "Graph":
        n_nodes = int(n_nodes)
        x = np.asarray(features, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        y = None if labels is None else np.asarray(labels, dtype=np.int64)
        return cls(
            n_nodes=n_nodes,
            edges=_readonly(canonical_edges(edges, n_nodes)),
            features=_readonly(x),
            labels=None if y is None else _readonly(y),
        )

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        if self.labels is None:
            return 0
        return int(self.labels.max()) + 1

    def adjacency(self) -> sp.csr_matrix:
        """Symmetric 0/1 adjacency matrix."""
        return edges_to_adjacency(self.edges, self.n_nodes)

    def with_edges(self, edges) -> "Graph":
        return Graph.build(self.n_nodes, edges, self.features, self.labels)


def edges_to_adjacency(edges, n_nodes: int) -> sp.csr_matrix:
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    rows = np.concatenate([e[:, 0], e[:, 1]])
    cols = np.concatenate([e[:, 1], e[:, 0]])
    data = np.ones(len(rows), dtype=np.float64)
    a = sp.coo_matrix((data, (rows, cols)), shape=(n_nodes, n_nodes)).tocsr()
    # duplicates were summed; the edge set is deduplicated so clip back to 1
    a.data = np.minimum(a.data, 1.0)
    return canonical_sparse(a)


def canonical_sparse(m) -> sp.csr_matrix:
    """CSR copy with float64 data, sorted indices and explicit zeros removed."""
    m = sp.csr_matrix(m, dtype=np.float64, copy=True)
    m.sum_duplicates()
    m.eliminate_zeros()
    m.sort_indices()
    return m


@dataclass(frozen=True)
class NormalizedAdjacency:
    matrix: sp.csr_matrix
    origin: str = "original"

    def __post_init__(self):
        if self.origin not in ORIGINS:
            raise ValidationError(f"unknown origin {self.origin!r}")

    @property
    def n_nodes(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


def normalize_adjacency(g, add_self_loops: bool = False, origin: str = "original") -> NormalizedAdjacency:
    """``D^{-1/2} A D^{-1/2}``, optionally on ``A + I``.

    ``g`` may be a :class:`Graph` or a square sparse/dense adjacency matrix.
    Zero-degree nodes get degree 1, which leaves their rows and columns empty.
    """
    a = g.adjacency() if isinstance(g, Graph) else canonical_sparse(g)
    n = a.shape[0]
    if n < 1:
        raise ValidationError("graph needs at least one node")
    if add_self_loops:
        a = canonical_sparse(a + sp.identity(n, format="csr"))
    deg = np.asarray(a.sum(axis=1)).ravel()
    deg[deg == 0] = 1.0
    d = sp.diags(1.0 / np.sqrt(deg))
    return NormalizedAdjacency(canonical_sparse(d @ a @ d), origin)


def laplacian(a_hat) -> sp.csr_matrix:
    """``I - Â``."""
    m = a_hat.matrix if isinstance(a_hat, NormalizedAdjacency) else canonical_sparse(a_hat)
    return canonical_sparse(sp.identity(m.shape[0], format="csr") - m)


def spmm(m, h) -> np.ndarray:
    """Sparse-dense product ``m @ h`` in float64.

    scipy's CSR kernel walks each row's entries in stored (sorted) order, so the
    accumulation order per output element is fixed.
    """
    if isinstance(m, NormalizedAdjacency):
        m = m.matrix
    h = np.asarray(h, dtype=np.float64)
    vec = h.ndim == 1
    if vec:
        h = h[:, None]
    if m.shape[1] != h.shape[0]:
        raise ValidationError(f"dimension mismatch: {m.shape} @ {h.shape}")
    out = np.asarray(m @ h, dtype=np.float64)
    return out[:, 0] if vec else out


def dense_eig_sym(m, cap: int = DENSE_EIG_CAP, tol: float = 1e-10):
    """Eigen-decomposition of a symmetric matrix; eigenvalues ascending.

    Returns ``(w, U)`` with ``m ≈ U diag(w) Uᵀ``.
    """
    m = m.toarray() if sp.issparse(m) else np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError("matrix must be square")
    if m.shape[0] > cap:
        raise ValidationError(f"matrix side {m.shape[0]} exceeds dense cap {cap}")
    if m.size and np.max(np.abs(m - m.T)) > tol:
        raise ValidationError("matrix is not symmetric")
    w, u = np.linalg.eigh(0.5 * (m + m.T))
    return w, u
