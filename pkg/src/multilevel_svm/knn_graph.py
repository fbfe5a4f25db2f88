"""Weighted k-nearest-neighbor proximity graph over one class's points.

Edges connect mutual-or-one-way nearest neighbors; weights are inverse
Euclidean distances, so strongly coupled (close) points interpolate to each
other during coarsening. The search is exact brute force, chunked to bound
memory; approximate backends can be plugged in by constructing a
ProximityGraph from any edge list.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

DISTANCE_FLOOR = 1e-10  # additive floor before inversion; duplicates stay finite
_CHUNK_ELEMENTS = 16_000_000  # budget for one (chunk x n) distance block


@dataclass(eq=False)
class ProximityGraph:
    """Undirected weighted graph with positive node volumes.

    adjacency is symmetric CSR with zero diagonal; every stored weight is
    positive.
    """

    node_count: int
    adjacency: sp.csr_matrix
    volumes: np.ndarray

    def __post_init__(self):
        self.volumes = np.asarray(self.volumes, dtype=np.float64)
        if self.volumes.shape != (self.node_count,):
            raise ValueError("volumes length must equal node_count")
        if not np.all(self.volumes > 0):
            raise ValueError("node volumes must be positive")

    def edge_list(self) -> np.ndarray:
        """(m, 3) array of (i, j, w) rows with i < j, sorted by (i, j)."""
        coo = sp.triu(self.adjacency, k=1).tocoo()
        order = np.lexsort((coo.col, coo.row))
        return np.column_stack([coo.row[order], coo.col[order], coo.data[order]])

    def weighted_degrees(self) -> np.ndarray:
        return np.asarray(self.adjacency.sum(axis=1)).ravel()


def graph_from_edges(node_count: int, edges, volumes) -> ProximityGraph:
    """Build a ProximityGraph from (i, j, w) triples (one direction each)."""
    edges = list(edges)
    if edges:
        i = np.array([e[0] for e in edges], dtype=np.int64)
        j = np.array([e[1] for e in edges], dtype=np.int64)
        w = np.array([e[2] for e in edges], dtype=np.float64)
        if np.any(i == j):
            raise ValueError("self-loops are not allowed")
        if np.any(w <= 0):
            raise ValueError("edge weights must be positive")
        adj = sp.coo_matrix((np.concatenate([w, w]),
                             (np.concatenate([i, j]), np.concatenate([j, i]))),
                            shape=(node_count, node_count)).tocsr()
        adj.sum_duplicates()
    else:
        adj = sp.csr_matrix((node_count, node_count))
    return ProximityGraph(node_count, adj, volumes)


def _knn_rows(points: np.ndarray, k_eff: int) -> np.ndarray:
    """Exact k-nearest rows per point, distance ties broken by lower index.

    Candidate distances come from the BLAS product form for speed; rows whose
    k-th boundary is tied fall back to an explicit lowest-index resolution.
    Callers recompute exact distances for the selected pairs, so the product
    form only has to rank correctly.
    """
    n = points.shape[0]
    sqnorms = (points * points).sum(axis=1)
    nbr = np.empty((n, k_eff), dtype=np.int64)
    chunk = max(1, _CHUNK_ELEMENTS // n)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        d2 = sqnorms[start:stop, None] + sqnorms[None, :]
        d2 -= 2.0 * (points[start:stop] @ points.T)
        np.maximum(d2, 0.0, out=d2)
        local = np.arange(stop - start)
        d2[local, start + local] = np.inf
        part = np.argpartition(d2, k_eff - 1, axis=1)[:, :k_eff]
        kth = np.take_along_axis(d2, part, axis=1).max(axis=1)
        ambiguous = np.flatnonzero((d2 <= kth[:, None]).sum(axis=1) > k_eff)
        nbr[start:stop] = part
        for r in ambiguous:
            row = d2[r]
            strict = np.flatnonzero(row < kth[r])
            ties = np.flatnonzero(row == kth[r])
            nbr[start + r] = np.concatenate([strict, ties[: k_eff - strict.size]])
    return nbr


def build_knn_graph(points: np.ndarray, volumes: np.ndarray, k: int = 10) -> ProximityGraph:
    """Build the symmetrized k-NN graph with inverse-distance weights.

    An edge (i, j) exists iff j is among the k nearest neighbors of i or vice
    versa; its weight is 1 / (||x_i - x_j|| + 1e-10). k is clipped to n - 1,
    and a single point yields an edgeless graph.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    n = points.shape[0]
    if n < 1:
        raise ValueError("need at least one point")
    if k < 1:
        raise ValueError("k must be >= 1")
    k_eff = min(k, n - 1)
    if k_eff == 0:
        return ProximityGraph(n, sp.csr_matrix((n, n)), volumes)

    nbr = _knn_rows(points, k_eff)
    src = np.repeat(np.arange(n, dtype=np.int64), k_eff)
    dst = nbr.ravel()
    lo = np.minimum(src, dst)
    hi = np.maximum(src, dst)
    key = lo * n + hi
    _, first = np.unique(key, return_index=True)
    lo, hi = lo[first], hi[first]
    # exact difference-based distances for the selected pairs: duplicates give
    # exactly zero, so their weight is exactly 1/DISTANCE_FLOOR
    d2 = ((points[lo] - points[hi]) ** 2).sum(axis=1)
    weights = 1.0 / (np.sqrt(d2) + DISTANCE_FLOOR)

    adj = sp.coo_matrix((np.concatenate([weights, weights]),
                         (np.concatenate([lo, hi]), np.concatenate([hi, lo]))),
                        shape=(n, n)).tocsr()
    return ProximityGraph(n, adj, volumes)


def dump_edges(graph: ProximityGraph, path: str) -> None:
    """Write the edge list as text lines ``i j w`` (debug aid)."""
    with open(path, "w", encoding="utf-8") as fh:
        for i, j, w in graph.edge_list():
            fh.write(f"{int(i)} {int(j)} {w!r}\n")
