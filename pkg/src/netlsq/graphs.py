"""Interaction graphs for network least-squares solvers.

Node ids are 1-based at every public interface. Undirected graphs store each
edge once; neighbor queries treat them symmetrically. Self-loops are never
stored: neighbor sets are self-inclusive by definition where the algorithms
need them (see :func:`degrees`).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Graph",
    "is_connected",
    "is_strongly_connected",
    "degrees",
    "graph_from_dict",
    "graph_to_dict",
    "load_graph",
    "save_graph",
    "random_connected_graph",
    "random_strong_digraph",
]


@dataclass(frozen=True)
class Graph:
    """Weighted graph with ``n_nodes`` nodes and explicit edge list.

    Parameters
    ----------
    n_nodes : int
        Number of nodes N; ids run 1..N.
    edges : tuple of (int, int, float)
        (source, target, weight) triples. Weights must be positive.
        For undirected graphs the orientation of each pair is immaterial
        and edges are canonicalized to (min, max) on construction.
    directed : bool
        Whether edges are one-way arcs.
    """

    n_nodes: int
    edges: tuple = field(default_factory=tuple)
    directed: bool = False

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ValueError("graph needs at least one node")
        canon = []
        seen = set()
        for e in self.edges:
            if len(e) == 2:
                i, j, w = e[0], e[1], 1.0
            else:
                i, j, w = e
            i, j, w = int(i), int(j), float(w)
            if not (1 <= i <= self.n_nodes and 1 <= j <= self.n_nodes):
                raise ValueError(f"edge ({i},{j}) has node id outside 1..{self.n_nodes}")
            if i == j:
                raise ValueError(f"explicit self-loop at node {i} is not allowed")
            if w <= 0:
                raise ValueError(f"edge ({i},{j}) has non-positive weight {w}")
            if not self.directed and i > j:
                i, j = j, i
            if (i, j) in seen:
                raise ValueError(f"duplicate edge ({i},{j})")
            seen.add((i, j))
            canon.append((i, j, w))
        object.__setattr__(self, "edges", tuple(canon))

    def adjacency(self) -> np.ndarray:
        """Dense N x N weight matrix; entry (i-1, j-1) is the weight of arc
        i -> j (both directions for undirected graphs)."""
        a = np.zeros((self.n_nodes, self.n_nodes))
        for i, j, w in self.edges:
            a[i - 1, j - 1] = w
            if not self.directed:
                a[j - 1, i - 1] = w
        return a

    def in_neighbors(self, i: int, include_self: bool = True) -> list:
        """Nodes j with an arc j -> i, optionally including i itself."""
        a = self.adjacency()
        out = [j + 1 for j in range(self.n_nodes) if a[j, i - 1] > 0]
        if include_self and i not in out:
            out.append(i)
        return sorted(out)

    def out_neighbors(self, i: int, include_self: bool = True) -> list:
        a = self.adjacency()
        out = [j + 1 for j in range(self.n_nodes) if a[i - 1, j] > 0]
        if include_self and i not in out:
            out.append(i)
        return sorted(out)


def _reachable_from(adj_bool: np.ndarray, start: int) -> np.ndarray:
    n = adj_bool.shape[0]
    seen = np.zeros(n, dtype=bool)
    stack = [start]
    seen[start] = True
    while stack:
        u = stack.pop()
        for v in np.nonzero(adj_bool[u])[0]:
            if not seen[v]:
                seen[v] = True
                stack.append(v)
    return seen


def is_connected(graph: Graph) -> bool:
    """True iff every node is reachable from node 1 treating edges as
    symmetric. Undirected graphs only."""
    if graph.directed:
        raise ValueError("is_connected expects an undirected graph")
    a = graph.adjacency() > 0
    return bool(_reachable_from(a | a.T, 0).all())


def is_strongly_connected(graph: Graph) -> bool:
    """True iff every node reaches every other along directed arcs."""
    if not graph.directed:
        raise ValueError("is_strongly_connected expects a directed graph")
    a = graph.adjacency() > 0
    for s in range(graph.n_nodes):
        if not _reachable_from(a, s).all():
            return False
    return True


def degrees(graph: Graph):
    """Per-node (in_degree, out_degree, weighted_degree).

    In/out degrees count the self-inclusive neighbor sets used by the
    mixing-matrix constructions, so an isolated node reports (1, 1, 0.0).
    The weighted degree sums incident edge weights and excludes self.
    """
    a = graph.adjacency()
    if not graph.directed:
        # symmetric adjacency already filled both ways
        pass
    out = []
    for i in range(graph.n_nodes):
        indeg = int((a[:, i] > 0).sum()) + (0 if a[i, i] > 0 else 1)
        outdeg = int((a[i, :] > 0).sum()) + (0 if a[i, i] > 0 else 1)
        wdeg = float(a[i, :].sum()) if not graph.directed else float(a[i, :].sum() + a[:, i].sum())
        out.append((indeg, outdeg, wdeg))
    return out


def graph_from_dict(d: dict) -> Graph:
    edges = []
    for e in d.get("edges", []):
        if len(e) == 2:
            edges.append((e[0], e[1], 1.0))
        else:
            edges.append((e[0], e[1], float(e[2])))
    return Graph(n_nodes=int(d["n"]), edges=tuple(edges), directed=bool(d.get("directed", False)))


def graph_to_dict(graph: Graph) -> dict:
    return {
        "n": graph.n_nodes,
        "directed": graph.directed,
        "edges": [[i, j, w] for i, j, w in graph.edges],
    }


def load_graph(path) -> Graph:
    with open(path) as f:
        return graph_from_dict(json.load(f))


def save_graph(graph: Graph, path) -> None:
    with open(path, "w") as f:
        json.dump(graph_to_dict(graph), f, indent=1)


def random_connected_graph(n: int, rng: np.random.Generator, extra_edge_prob: float = 0.3) -> Graph:
    """Seeded generator: random spanning tree plus Erdos-Renyi extras."""
    edges = set()
    perm = rng.permutation(n) + 1
    for k in range(1, n):
        a, b = int(perm[k]), int(perm[rng.integers(0, k)])
        edges.add((min(a, b), max(a, b)))
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            if rng.random() < extra_edge_prob:
                edges.add((i, j))
    return Graph(n_nodes=n, edges=tuple((i, j, 1.0) for i, j in sorted(edges)), directed=False)


def random_strong_digraph(n: int, rng: np.random.Generator, extra_arc_prob: float = 0.3) -> Graph:
    """Seeded generator: directed cycle plus random extra arcs, so the
    result is strongly connected by construction."""
    arcs = set()
    for i in range(1, n + 1):
        arcs.add((i, i % n + 1))
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if i != j and rng.random() < extra_arc_prob:
                arcs.add((i, j))
    return Graph(n_nodes=n, edges=tuple((i, j, 1.0) for i, j in sorted(arcs)), directed=True)
