"""k-nearest-neighbor graphs and Laplacian Eigenmaps.

Laplacian Eigenmaps is treated as weighted kernel PCA: the Gram matrix is
``W - S`` (already centered) and the data weights are ``S^{-1/2}``.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import cdist

from .embedding import EmbeddingResult, dataset_hash
from .exceptions import DegenerateDataError, ParameterError
from .kernels import GramMatrix, WeightVector, as_dataset, median_bandwidth, weighted_center
from .linalg import sym_eig_top

__all__ = [
    "NeighborhoodGraph",
    "knn_indices",
    "knn_adjacency",
    "le_gram",
    "le_matrix",
    "le_embed",
    "le_eigenpairs",
    "le_scale",
    "normalized_adjacency",
    "export_edges",
    "SCALINGS",
]

WEIGHT_MODES = ("binary", "heat")
SCALINGS = ("paper", "classic")


_KNN_CHUNK = 1024


@dataclass(frozen=True)
class NeighborhoodGraph:
    """Symmetric kNN graph; ``adjacency`` is a scipy CSR matrix ``W``."""

    adjacency: scipy.sparse.csr_matrix
    degrees: np.ndarray
    k_nn: int
    weight_mode: str = "binary"
    gamma: float | None = None

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    def dense(self) -> np.ndarray:
        return self.adjacency.toarray()

    def n_components(self) -> int:
        return connected_components(self.adjacency, directed=False)[0]


def knn_indices(d2: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` smallest entries per row, ties broken by smaller index.

    ``d2`` holds squared distances; set entries to ``inf`` to exclude them.
    Rows of the result are sorted by (distance, index).
    """
    n, m = d2.shape
    if not 1 <= k <= m:
        raise ParameterError(f"k must lie in [1, {m}], got {k}")
    kth = np.partition(d2, k - 1, axis=1)[:, k - 1 : k]
    less = d2 < kth
    tied = d2 == kth
    need = k - less.sum(axis=1, keepdims=True)
    take = less | (tied & (np.cumsum(tied, axis=1) <= need))
    cols = np.nonzero(take)[1].reshape(n, k)
    dist = d2[np.arange(n)[:, None], cols]
    order = np.lexsort((cols, dist))
    return np.take_along_axis(cols, order, axis=1)


def knn_adjacency(x, k_nn: int, mode: str = "binary", gamma: float | None = None) -> NeighborhoodGraph:
    """Symmetric kNN adjacency ``W`` ("i among j's neighbors, or vice versa").

    Brute-force Euclidean search, processed in row blocks. ``mode="heat"``
    weights each edge by ``exp(-gamma |x_i - x_j|^2 / 2)``; a missing
    ``gamma`` is set by the median trick.
    """
    x = as_dataset(x)
    n = x.shape[0]
    if not 1 <= k_nn < n:
        raise ParameterError(f"k_nn must satisfy 1 <= k_nn < n={n}, got {k_nn}")
    if mode not in WEIGHT_MODES:
        raise ParameterError(f"unknown weight mode {mode!r}; expected one of {WEIGHT_MODES}")
    if mode == "heat" and gamma is None:
        gamma = median_bandwidth(x)
    elif mode == "binary":
        gamma = None

    cols = np.empty((n, k_nn), dtype=np.int64)
    d2nb = np.empty((n, k_nn))
    for lo in range(0, n, _KNN_CHUNK):
        hi = min(n, lo + _KNN_CHUNK)
        d2 = cdist(x[lo:hi], x, "sqeuclidean")
        d2[np.arange(hi - lo), np.arange(lo, hi)] = np.inf
        nb = knn_indices(d2, k_nn)
        cols[lo:hi] = nb
        d2nb[lo:hi] = np.take_along_axis(d2, nb, axis=1)

    rows = np.repeat(np.arange(n), k_nn)
    vals = np.exp(-0.5 * gamma * d2nb.ravel()) if mode == "heat" else np.ones(n * k_nn)
    w = scipy.sparse.csr_matrix((vals, (rows, cols.ravel())), shape=(n, n))
    w = w.maximum(w.T).tocsr()
    w.sort_indices()
    degrees = np.asarray(w.sum(axis=1)).ravel()
    assert np.all(degrees > 0), "isolated vertex in kNN graph"
    return NeighborhoodGraph(w, degrees, k_nn, mode, gamma)


def le_gram(graph: NeighborhoodGraph) -> tuple[GramMatrix, WeightVector]:
    """Gram matrix ``W - S`` (centered by construction) and weights ``S^{-1/2}``."""
    s = graph.degrees
    if np.any(s <= 0):
        raise DegenerateDataError("graph has a vertex with zero degree")
    g = graph.dense()
    g[np.diag_indices_from(g)] -= s
    return GramMatrix(g, centered=True), WeightVector(1.0 / np.sqrt(s))


def le_matrix(graph: NeighborhoodGraph) -> np.ndarray:
    """``C = S^{-1/2} (W - S) S^{-1/2}``, negative semidefinite with top eigenvalue 0."""
    g, p = le_gram(graph)
    return weighted_center(g, p).values


def normalized_adjacency(graph: NeighborhoodGraph) -> scipy.sparse.csr_matrix:
    """Sparse ``S^{-1/2} W S^{-1/2}``, i.e. ``C + I`` for the LE matrix ``C``.

    Same eigenvectors as ``C`` with eigenvalues shifted into ``[-1, 1]``; the
    trivial direction ``S^{1/2} 1`` has the largest eigenvalue, 1.
    """
    r = 1.0 / np.sqrt(graph.degrees)
    d = scipy.sparse.diags(r)
    return (d @ graph.adjacency @ d).tocsr()


def le_embed(
    x,
    k_nn: int,
    k: int,
    mode: str = "binary",
    scaling: str = "paper",
    gamma: float | None = None,
) -> EmbeddingResult:
    """One-manifold Laplacian Eigenmaps.

    Takes the ``k + 1`` algebraically largest eigenpairs of ``C``, drops the
    trivial one (eigenvalue 0) and scales the rest by ``S^{1/2}``
    (``scaling="paper"``) or ``S^{-1/2}`` (``scaling="classic"``, the
    generalized-eigenvector convention).
    """
    x = as_dataset(x)
    if scaling not in SCALINGS:
        raise ParameterError(f"unknown scaling {scaling!r}; expected one of {SCALINGS}")
    graph = knn_adjacency(x, k_nn, mode, gamma)
    values, vectors = le_eigenpairs(graph, k)
    return EmbeddingResult(
        coords_x=le_scale(vectors, graph.degrees, scaling),
        coords_y=None,
        spectrum=values,
        config={
            "method": "le",
            "k_nn": k_nn,
            "k": k,
            "mode": mode,
            "gamma": graph.gamma,
            "scaling": scaling,
        },
        provenance={"dataset_hash": dataset_hash(x)},
    )


def le_eigenpairs(graph: NeighborhoodGraph, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs ``2..k+1`` of ``C`` (algebraically largest first, trivial one dropped).

    Warns when the graph is disconnected: every component then contributes
    a zero eigenvalue and the leading coordinates are component indicators.
    """
    n = graph.n
    if not 1 <= k <= n - 1:
        raise ParameterError(f"k must lie in [1, {n - 1}], got {k}")
    ncomp = graph.n_components()
    if ncomp > 1:
        warnings.warn(
            f"kNN graph has {ncomp} connected components; each contributes a zero eigenvalue",
            stacklevel=3,
        )
    spec = sym_eig_top(le_matrix(graph), k + 1)
    return spec.eigenvalues[1:].copy(), np.ascontiguousarray(spec.eigenvectors[:, 1:])


def le_scale(vectors: np.ndarray, degrees: np.ndarray, scaling: str = "paper") -> np.ndarray:
    """``S^{1/2} V`` (``"paper"``) or ``S^{-1/2} V`` (``"classic"``)."""
    if scaling not in SCALINGS:
        raise ParameterError(f"unknown scaling {scaling!r}; expected one of {SCALINGS}")
    root = np.sqrt(degrees)[:, None]
    return vectors * root if scaling == "paper" else vectors / root


def export_edges(graph: NeighborhoodGraph, path) -> None:
    """Write the upper-triangle edge list as CSV rows ``i, j, weight``."""
    upper = scipy.sparse.triu(graph.adjacency, 1).tocoo()
    order = np.lexsort((upper.col, upper.row))
    with Path(path).open("w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["i", "j", "weight"])
        for t in order:
            out.writerow([int(upper.row[t]), int(upper.col[t]), repr(float(upper.data[t]))])
