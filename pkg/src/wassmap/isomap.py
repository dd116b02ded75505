"""ISOMAP baseline: neighbor graph, graph geodesics, classical MDS."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, dijkstra
from scipy.spatial.distance import cdist

from .embedding import classical_mds
from .errors import DimensionMismatch, DisconnectedGraph
from .transport import SquaredDistanceMatrix


@dataclass(frozen=True, eq=False)
class NeighborGraph:
    """Undirected weighted graph on ``n`` nodes, edges stored with i < j.

    ``rule`` is ``("epsilon", eps)`` or ``("knn", k)``. Coincident input
    vectors are joined by zero-weight edges so they stay in one component;
    every other edge weight is strictly positive.
    """

    n: int
    i: np.ndarray
    j: np.ndarray
    weight: np.ndarray
    rule: tuple

    @property
    def n_edges(self) -> int:
        return self.weight.size

    def adjacency(self):
        # explicit zeros would vanish from a sparse matrix, so lift them
        w = np.where(self.weight > 0, self.weight, np.finfo(float).tiny)
        a = coo_matrix((w, (self.i, self.j)), shape=(self.n, self.n)).tocsr()
        return a + a.T

    def components(self):
        return connected_components(self.adjacency(), directed=False)

    def to_edge_list(self) -> str:
        kind, val = self.rule
        lines = [f"# n {self.n} {kind} {val!r}"]
        lines += [f"{a} {b} {w:.17g}" for a, b, w in zip(self.i, self.j, self.weight)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_edge_list(cls, text: str) -> "NeighborGraph":
        rows = text.strip().splitlines()
        _, _, n, kind, val = rows[0].split()
        data = [r.split() for r in rows[1:] if r.strip()]
        i = np.array([int(r[0]) for r in data], dtype=np.int64)
        j = np.array([int(r[1]) for r in data], dtype=np.int64)
        w = np.array([float(r[2]) for r in data])
        val = int(val) if kind == "knn" else float(val)
        return cls(int(n), i, j, w, (kind, val))


def build_graph(vectors, *, epsilon: float | None = None, k: int | None = None) -> NeighborGraph:
    """Epsilon-neighborhood or symmetrized kNN graph with Euclidean weights.

    Exactly one of ``epsilon`` and ``k`` must be given. kNN ties are broken
    toward the lower index and the graph is symmetrized by union.
    """
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionMismatch("vectors must form an (N, D) array")
    n = x.shape[0]
    if n < 2:
        raise ValueError("need at least two vectors")
    if (epsilon is None) == (k is None):
        raise ValueError("give exactly one of epsilon or k")
    dist = cdist(x, x)
    if epsilon is not None:
        if not epsilon > 0:
            raise ValueError("epsilon must be positive")
        adj = dist <= epsilon
        rule = ("epsilon", float(epsilon))
    else:
        if not 1 <= k < n:
            raise ValueError("k must satisfy 1 <= k < N")
        d = dist.copy()
        np.fill_diagonal(d, np.inf)
        nbr = np.argsort(d, axis=1, kind="stable")[:, :k]
        adj = np.zeros((n, n), dtype=bool)
        adj[np.repeat(np.arange(n), k), nbr.ravel()] = True
        adj |= adj.T
        rule = ("knn", int(k))
    iu, ju = np.nonzero(np.triu(adj, 1))
    return NeighborGraph(n, iu.astype(np.int64), ju.astype(np.int64), dist[iu, ju], rule)


def largest_component(g: NeighborGraph) -> np.ndarray:
    """Sorted node indices of the largest component (lowest label on ties)."""
    _, lab = g.components()
    sizes = np.bincount(lab)
    return np.flatnonzero(lab == int(np.argmax(sizes)))


def subgraph(g: NeighborGraph, nodes) -> NeighborGraph:
    nodes = np.asarray(nodes, dtype=np.int64)
    remap = np.full(g.n, -1, dtype=np.int64)
    remap[nodes] = np.arange(nodes.size)
    keep = (remap[g.i] >= 0) & (remap[g.j] >= 0)
    return NeighborGraph(nodes.size, remap[g.i[keep]], remap[g.j[keep]], g.weight[keep], g.rule)


def geodesic_squared_distances(g: NeighborGraph, *, restrict_to_largest: bool = False):
    """Squared shortest-path lengths.

    Raises ``DisconnectedGraph`` unless ``restrict_to_largest`` is set, in
    which case the result covers only ``largest_component(g)``; the
    function then returns ``(matrix, kept_indices)``.
    """
    ncomp, lab = g.components()
    kept = np.arange(g.n)
    if ncomp > 1:
        if not restrict_to_largest:
            raise DisconnectedGraph(np.bincount(lab).tolist())
        kept = largest_component(g)
        g = subgraph(g, kept)
    sp = dijkstra(g.adjacency(), directed=False)
    sp = np.where(sp < 1e-300, 0.0, sp)
    sq = sp**2
    sq = 0.5 * (sq + sq.T)
    np.fill_diagonal(sq, 0.0)
    mat = SquaredDistanceMatrix(sq, "geodesic_squared")
    return (mat, kept) if restrict_to_largest else mat


def isomap(vectors, d: int, *, epsilon=None, k=None, restrict_to_largest: bool = False):
    """ISOMAP embedding; with ``restrict_to_largest`` returns ``(embedding, kept)``."""
    g = build_graph(vectors, epsilon=epsilon, k=k)
    if restrict_to_largest:
        w, kept = geodesic_squared_distances(g, restrict_to_largest=True)
        return classical_mds(w, d), kept
    return classical_mds(geodesic_squared_distances(g), d)

