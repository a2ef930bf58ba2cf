"""Consensus weight matrices.

Undirected networks use a single symmetric doubly stochastic matrix W.
Directed networks use a pair (P, Q) with P row stochastic mixing the
estimates and Q column stochastic mixing the gradient trackers. Validation
is reported property-by-property so callers can see exactly which
assumption an externally supplied matrix violates.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import Graph, degrees, is_connected, is_strongly_connected

__all__ = [
    "MixingUndirected",
    "MixingDirected",
    "build_w_laplacian",
    "validate_w",
    "build_pq",
    "validate_pq",
    "laplacian",
    "default_tau",
]

# sums of <= N unit-scale rationals in doubles
STOCHASTIC_TOL = 1e-12
# eigenvalue comparisons on small dense symmetric matrices
SPECTRUM_TOL = 1e-9


@dataclass(frozen=True)
class MixingUndirected:
    w: np.ndarray

    @property
    def n(self) -> int:
        return self.w.shape[0]


@dataclass(frozen=True)
class MixingDirected:
    p: np.ndarray
    q: np.ndarray

    @property
    def n(self) -> int:
        return self.p.shape[0]


def laplacian(graph: Graph) -> np.ndarray:
    """Weighted graph Laplacian L = D - A of an undirected graph."""
    if graph.directed:
        raise ValueError("laplacian expects an undirected graph")
    a = graph.adjacency()
    return np.diag(a.sum(axis=1)) - a


def default_tau(graph: Graph) -> float:
    """Scaling for the Laplacian mixing rule: max weighted degree plus one.

    Guarantees tau > lambda_max(L)/2 because lambda_max(L) is at most
    twice the maximum weighted degree.
    """
    return max(d[2] for d in degrees(graph)) + 1.0


def build_w_laplacian(graph: Graph, tau: float | None = None) -> MixingUndirected:
    """W = I - L/tau on a connected undirected graph.

    Parameters
    ----------
    graph : Graph
        Undirected, connected.
    tau : float, optional
        Must exceed lambda_max(L)/2. Defaults to max weighted degree + 1.
    """
    if graph.directed:
        raise ValueError("build_w_laplacian expects an undirected graph")
    if not is_connected(graph):
        raise ValueError("graph must be connected")
    L = laplacian(graph)
    if tau is None:
        tau = default_tau(graph)
    lam_max = float(np.linalg.eigvalsh(L).max())
    if tau <= lam_max / 2.0:
        raise ValueError(f"tau={tau} too small; needs tau > lambda_max(L)/2 = {lam_max / 2.0}")
    w = np.eye(graph.n_nodes) - L / tau
    return MixingUndirected(w=w)


def validate_w(w: np.ndarray, graph: Graph) -> dict:
    """Check a candidate W against every property the undirected algorithm
    assumes. Returns {"ok": bool, "checks": {name: bool}, "details": {...}}."""
    w = np.asarray(w, dtype=float)
    n = graph.n_nodes
    checks = {}
    details = {}
    checks["shape"] = w.shape == (n, n)
    if not checks["shape"]:
        return {"ok": False, "checks": checks, "details": {"shape": w.shape}}
    checks["symmetric"] = bool(np.abs(w - w.T).max() <= STOCHASTIC_TOL)
    checks["row_stochastic"] = bool(np.abs(w.sum(axis=1) - 1.0).max() <= STOCHASTIC_TOL)
    checks["col_stochastic"] = bool(np.abs(w.sum(axis=0) - 1.0).max() <= STOCHASTIC_TOL)
    checks["positive_diagonal"] = bool((np.diag(w) > 0).all())

    a = graph.adjacency() > 0
    a = a | a.T
    off = ~np.eye(n, dtype=bool)
    checks["sparsity"] = bool(((w > 0) == a)[off].all() and (w[off] >= 0).all())
    evals = np.linalg.eigvalsh((w + w.T) / 2.0)
    details["spectrum"] = evals.tolist()
    checks["spectrum_in_range"] = bool(evals.min() > -1.0 + SPECTRUM_TOL and evals.max() <= 1.0 + SPECTRUM_TOL)
    checks["simple_eigenvalue_one"] = int(np.sum(np.abs(evals - 1.0) <= SPECTRUM_TOL)) == 1
    return {"ok": all(checks.values()), "checks": checks, "details": details}


def build_pq(graph: Graph) -> MixingDirected:
    """Equal-weight mixing pair on a strongly connected digraph.

    P spreads 1/|in-neighborhood of i| across row i and Q spreads
    1/|out-neighborhood of j| down column j, neighbor sets self-inclusive,
    so P is row stochastic and Q is column stochastic by construction.
    """
    if not graph.directed:
        raise ValueError("build_pq expects a directed graph")
    if not is_strongly_connected(graph):
        raise ValueError("graph must be strongly connected")
    n = graph.n_nodes
    p = np.zeros((n, n))
    q = np.zeros((n, n))
    for i in range(1, n + 1):
        nin = graph.in_neighbors(i)
        for j in nin:
            p[i - 1, j - 1] = 1.0 / len(nin)
    for j in range(1, n + 1):
        nout = graph.out_neighbors(j)
        for i in nout:
            q[i - 1, j - 1] = 1.0 / len(nout)
    return MixingDirected(p=p, q=q)


def validate_pq(p: np.ndarray, q: np.ndarray, graph: Graph) -> dict:
    """Property-by-property check of a directed mixing pair."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    n = graph.n_nodes
    checks = {}
    checks["shape"] = p.shape == (n, n) and q.shape == (n, n)
    if not checks["shape"]:
        return {"ok": False, "checks": checks, "details": {}}
    checks["p_row_stochastic"] = bool(np.abs(p.sum(axis=1) - 1.0).max() <= STOCHASTIC_TOL)
    checks["q_col_stochastic"] = bool(np.abs(q.sum(axis=0) - 1.0).max() <= STOCHASTIC_TOL)
    checks["nonnegative"] = bool((p >= 0).all() and (q >= 0).all())

    p_ok = True
    q_ok = True
    for i in range(1, n + 1):
        nin = set(graph.in_neighbors(i))
        nout = set(graph.out_neighbors(i))
        for j in range(1, n + 1):
            if (p[i - 1, j - 1] > 0) != (j in nin):
                p_ok = False
            if (q[j - 1, i - 1] > 0) != (j in nout):
                q_ok = False
    checks["p_sparsity"] = p_ok
    checks["q_sparsity"] = q_ok
    return {"ok": all(checks.values()), "checks": checks, "details": {}}
