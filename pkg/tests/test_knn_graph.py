import inspect

import numpy as np
import pytest

from multilevel_svm.knn_graph import (DISTANCE_FLOOR, ProximityGraph,
                                      build_knn_graph, graph_from_edges)


def knn_oracle_edges(points, k):
    """Brute-force reference: full distance matrix, ties to the lower index."""
    n = len(points)
    k_eff = min(k, n - 1)
    dist = np.sqrt(((points[:, None, :] - points[None, :, :]) ** 2).sum(-1))
    edges = {}
    for i in range(n):
        order = sorted((j for j in range(n) if j != i),
                       key=lambda j: (dist[i, j], j))
        for j in order[:k_eff]:
            edges[(min(i, j), max(i, j))] = 1.0 / (dist[i, j] + DISTANCE_FLOOR)
    return edges


def graph_edges(graph: ProximityGraph) -> dict:
    return {(int(i), int(j)): w for i, j, w in graph.edge_list()}


def test_two_points_distance_two():
    points = np.array([[0.0, 0.0], [2.0, 0.0]])
    graph = build_knn_graph(points, np.ones(2), k=1)
    edges = graph_edges(graph)
    assert set(edges) == {(0, 1)}
    assert edges[(0, 1)] == pytest.approx(0.5, abs=1e-9)


def test_duplicate_points_finite_weight():
    points = np.array([[1.0, 1.0], [1.0, 1.0], [2.0, 1.0]])
    graph = build_knn_graph(points, np.ones(3), k=1)
    edges = graph_edges(graph)
    assert edges[(0, 1)] == pytest.approx(1.0 / DISTANCE_FLOOR, rel=1e-12)
    assert (0, 2) in edges  # node 2 ties 0 vs 1; lower index wins
    assert (1, 2) not in edges


def test_default_k_is_ten():
    assert inspect.signature(build_knn_graph).parameters["k"].default == 10


def test_single_point_edgeless():
    graph = build_knn_graph(np.zeros((1, 3)), np.ones(1), k=5)
    assert graph.adjacency.nnz == 0


def test_every_node_connected(rng):
    points = rng.normal(size=(40, 3))
    graph = build_knn_graph(points, np.ones(40), k=2)
    degrees = np.diff(graph.adjacency.indptr)
    assert np.all(degrees >= 1)


def test_adjacency_symmetric(rng):
    points = rng.normal(size=(60, 4))
    graph = build_knn_graph(points, np.ones(60), k=3)
    diff = graph.adjacency - graph.adjacency.T
    assert abs(diff).max() == 0.0
    assert graph.adjacency.diagonal().sum() == 0.0


def test_weight_monotone_in_distance(rng):
    points = rng.normal(size=(50, 2))
    graph = build_knn_graph(points, np.ones(50), k=5)
    for i, j, w in graph.edge_list():
        d = np.linalg.norm(points[int(i)] - points[int(j)])
        assert w == pytest.approx(1.0 / (d + DISTANCE_FLOOR), rel=1e-12)


def test_permutation_invariance(rng):
    points = rng.normal(size=(35, 3))
    graph = build_knn_graph(points, np.ones(35), k=4)
    perm = rng.permutation(35)
    permuted = build_knn_graph(points[perm], np.ones(35), k=4)
    # original index i sits at permuted position inv[i]
    inv = np.empty(35, dtype=int)
    inv[perm] = np.arange(35)
    expected = {(min(inv[i], inv[j]), max(inv[i], inv[j])): w
                for (i, j), w in graph_edges(graph).items()}
    got = graph_edges(permuted)
    assert set(got) == set(expected)
    for key, w in expected.items():
        assert got[key] == pytest.approx(w, rel=1e-9)


@pytest.mark.parametrize("n,k,dim,seed", [
    (12, 1, 2, 0), (37, 3, 2, 1), (120, 10, 5, 2), (500, 10, 3, 3), (64, 7, 1, 4),
])
def test_matches_bruteforce_oracle(n, k, dim, seed):
    rng = np.random.default_rng(seed)
    points = rng.normal(size=(n, dim))
    # salt in duplicates so degenerate distances are exercised
    points[1] = points[0]
    if n > 20:
        points[17] = points[5]
    expected = knn_oracle_edges(points, k)
    got = graph_edges(build_knn_graph(points, np.ones(n), k=k))
    assert set(got) == set(expected)
    for key, w in expected.items():
        assert got[key] == pytest.approx(w, rel=1e-12)


def test_graph_from_edges_rejects_bad_input():
    with pytest.raises(ValueError):
        graph_from_edges(2, [(0, 0, 1.0)], np.ones(2))
    with pytest.raises(ValueError):
        graph_from_edges(2, [(0, 1, -1.0)], np.ones(2))
