import heapq

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wassmap.embedding import classical_mds
from wassmap.errors import DisconnectedGraph
from wassmap.isomap import NeighborGraph, build_graph, geodesic_squared_distances, isomap, largest_component


def heap_dijkstra(g, src):
    adj = [[] for _ in range(g.n)]
    for a, b, w in zip(g.i, g.j, g.weight):
        adj[a].append((b, w))
        adj[b].append((a, w))
    dist = [np.inf] * g.n
    dist[src] = 0.0
    heap = [(0.0, src)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for v, w in adj[u]:
            if d + w < dist[v]:
                dist[v] = d + w
                heapq.heappush(heap, (d + w, v))
    return np.array(dist)


def test_path_graph_example():
    x = np.array([[0.0], [1.0], [3.0]])
    g = build_graph(x, epsilon=2.0)
    assert list(zip(g.i, g.j)) == [(0, 1), (1, 2)]
    w = geodesic_squared_distances(g).entries
    np.testing.assert_array_equal(w, [[0, 1, 9], [1, 0, 4], [9, 4, 0]])


def test_arc_geodesic():
    t = np.linspace(0, np.pi, 50)
    x = np.c_[np.cos(t), np.sin(t)]
    chord = 2 * np.sin(np.pi / 49 / 2)
    w = geodesic_squared_distances(build_graph(x, epsilon=1.01 * chord)).entries
    assert np.sqrt(w[0, -1]) == pytest.approx(49 * chord, rel=1e-12)


@given(st.integers(0, 2**32 - 1), st.integers(5, 25), st.integers(1, 4))
def test_matches_heap_oracle(seed, n, k):
    x = np.random.default_rng(seed).normal(size=(n, 3))
    g = build_graph(x, k=k)
    ncomp, _ = g.components()
    if ncomp > 1:
        with pytest.raises(DisconnectedGraph):
            geodesic_squared_distances(g)
        return
    w = geodesic_squared_distances(g).entries
    for s in range(n):
        np.testing.assert_allclose(np.sqrt(w[s]), heap_dijkstra(g, s), rtol=1e-12, atol=1e-12)


def test_knn_is_symmetrized_union(rng):
    x = rng.normal(size=(12, 2))
    g = build_graph(x, k=1)
    d = np.linalg.norm(x[:, None] - x[None], axis=2)
    np.fill_diagonal(d, np.inf)
    nn = np.argmin(d, axis=1)
    want = {tuple(sorted((a, int(b)))) for a, b in enumerate(nn)}
    assert set(zip(g.i.tolist(), g.j.tolist())) == want


def test_epsilon_monotone(rng):
    x = rng.normal(size=(30, 2))
    prev = None
    for eps in (1.0, 1.5, 2.5, 10.0):
        g = build_graph(x, epsilon=eps)
        if g.components()[0] > 1:
            continue
        w = geodesic_squared_distances(g).entries
        if prev is not None:
            assert np.all(w <= prev + 1e-12)
        prev = w


def test_complete_graph_equals_mds(rng):
    x = rng.normal(size=(15, 3))
    emb, _ = isomap(x, 2, epsilon=1e9), None
    ref = classical_mds(np.sum((x[:, None] - x[None]) ** 2, axis=2), 2)
    np.testing.assert_allclose(emb.points, ref.points, atol=1e-9)


def test_disconnected_reports_sizes():
    x = np.array([[0.0], [0.5], [1.0], [10.0], [10.5]])
    g = build_graph(x, epsilon=1.0)
    with pytest.raises(DisconnectedGraph) as info:
        geodesic_squared_distances(g)
    assert info.value.component_sizes == [3, 2]
    np.testing.assert_array_equal(largest_component(g), [0, 1, 2])
    w, kept = geodesic_squared_distances(g, restrict_to_largest=True)
    np.testing.assert_array_equal(kept, [0, 1, 2])
    assert w.entries[0, 2] == pytest.approx(1.0)
    emb, kept = isomap(x, 1, epsilon=1.0, restrict_to_largest=True)
    assert emb.n == 3


def test_coincident_vectors_stay_connected():
    x = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]])
    g = build_graph(x, k=1)
    assert g.components()[0] == 1
    w = geodesic_squared_distances(g).entries
    assert w[0, 1] == 0.0 and w[0, 2] == 1.0


def test_edge_list_round_trip(rng):
    g = build_graph(rng.normal(size=(10, 2)), k=3)
    back = NeighborGraph.from_edge_list(g.to_edge_list())
    assert back.rule == g.rule and back.n == g.n
    np.testing.assert_array_equal(back.weight, g.weight)
    np.testing.assert_array_equal(back.i, g.i)


@pytest.mark.parametrize("kw", [{}, {"epsilon": 1.0, "k": 2}, {"epsilon": -1.0}, {"k": 0}, {"k": 5}])
def test_bad_rules(kw):
    with pytest.raises(ValueError):
        build_graph(np.zeros((5, 2)), **kw)
