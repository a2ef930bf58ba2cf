"""Closed-loop spectral analysis and step-size bounds.

The stacked iteration is linear: [x(t+1); v(t+1)] = M [x(t); v(t)]. The
tools here assemble M, verify its semisimple eigenvalue structure at 1,
decide convergence from the remaining spectrum, and compute the exact
critical step-size for undirected networks together with a conservative
degree-based bound that nodes can obtain by max-consensus.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .graphs import Graph, degrees, is_connected, is_strongly_connected
from .mixing import MixingDirected, MixingUndirected
from .problem import LinearProblem, h_tilde, lambda_max_htilde

EPS_EIG = 1e-8
EPS_MARGIN = 1e-9
RANK_CUTOFF = 1e-8


@dataclass(frozen=True)
class ClosedLoopMatrix:
    m_matrix: np.ndarray
    alpha: float
    flavor: str  # "undirected" or "directed"

    @property
    def order(self) -> int:
        return self.m_matrix.shape[0]


@dataclass(frozen=True)
class SpectralReport:
    eigenvalues: np.ndarray
    count_at_one: int
    semisimple_at_one: bool
    spectral_radius_rest: float
    verdict: str
    alpha_bar: Optional[float] = None


def _assemble(p: np.ndarray, q: np.ndarray, problem: LinearProblem,
              alpha: float, flavor: str) -> ClosedLoopMatrix:
    n, m = problem.n_nodes, problem.m
    if p.shape != (n, n) or q.shape != (n, n):
        raise ValueError("mixing matrix size does not match the problem")
    nm = n * m
    eye_m = np.eye(m)
    ht = h_tilde(problem)
    top = np.hstack([np.kron(p, eye_m), -alpha * np.eye(nm)])
    bottom = np.hstack([
        -ht @ np.kron(np.eye(n) - p, eye_m),
        np.kron(q, eye_m) - alpha * ht,
    ])
    return ClosedLoopMatrix(m_matrix=np.vstack([top, bottom]),
                            alpha=float(alpha), flavor=flavor)


def assemble_m_undirected(w: MixingUndirected, problem: LinearProblem,
                          alpha: float) -> ClosedLoopMatrix:
    return _assemble(w.w, w.w, problem, alpha, "undirected")


def assemble_m_directed(pq: MixingDirected, problem: LinearProblem,
                        alpha: float) -> ClosedLoopMatrix:
    return _assemble(pq.p, pq.q, problem, alpha, "directed")


def semisimple_one_check(mat: ClosedLoopMatrix, m: int) -> dict:
    """Count eigenvalues at 1 and test that the eigenvalue is semisimple.

    The count uses the cluster |lambda - 1| <= EPS_EIG; semisimplicity is
    decided by the numerical rank of M - I (eigenvalue clustering alone
    is ill-posed, the rank test is stable).
    """
    mm = mat.m_matrix
    eigs = np.linalg.eigvals(mm)
    count = int(np.sum(np.abs(eigs - 1.0) <= EPS_EIG))
    sv = np.linalg.svd(mm - np.eye(mm.shape[0]), compute_uv=False)
    rank = int(np.sum(sv > RANK_CUTOFF * sv[0]))
    semisimple = (count == m) and (rank == mm.shape[0] - m)
    return {"count_at_one": count, "semisimple": semisimple}


def convergence_predicate(mat: ClosedLoopMatrix, m: int) -> SpectralReport:
    """Classify M as converges, marginal, or diverges.

    converges requires the semisimple structure at 1 and every other
    eigenvalue strictly inside the unit circle by more than EPS_MARGIN.
    """
    mm = mat.m_matrix
    eigs = np.linalg.eigvals(mm)
    at_one = np.abs(eigs - 1.0) <= EPS_EIG
    count = int(np.sum(at_one))
    sv = np.linalg.svd(mm - np.eye(mm.shape[0]), compute_uv=False)
    rank = int(np.sum(sv > RANK_CUTOFF * sv[0]))
    semisimple = (count == m) and (rank == mm.shape[0] - m)
    rest = eigs[~at_one]
    rho = float(np.max(np.abs(rest))) if rest.size else 0.0
    if semisimple and rho < 1.0 - EPS_MARGIN:
        verdict = "converges"
    elif abs(rho - 1.0) <= EPS_MARGIN:
        verdict = "marginal"
    else:
        verdict = "diverges"
    order = np.lexsort((eigs.imag, eigs.real, -np.abs(eigs)))
    return SpectralReport(
        eigenvalues=eigs[order],
        count_at_one=count,
        semisimple_at_one=semisimple,
        spectral_radius_rest=rho,
        verdict=verdict,
    )


def critical_step_size(w: MixingUndirected, problem: LinearProblem) -> float:
    """Exact critical step-size for an undirected network.

    alpha_bar = 1 / (2 lambda_max(((I+W)^-2 (x) I_m) Htilde)). The product
    is non-symmetric but shares its nonzero spectrum with the symmetric
    PSD matrix B^(1/2) Htilde B^(1/2), B = (I+W)^-2 (x) I_m, so the
    eigenproblem solved here is symmetric.
    """
    wm = w.w
    vals, vecs = np.linalg.eigh(wm)
    if np.min(1.0 + vals) <= 1e-12:
        raise ValueError("I + W is singular; W spectrum must lie in (-1, 1]")
    # B^(1/2) = U diag(1/(1+lambda)) U^T (x) I_m
    b_half_small = (vecs / (1.0 + vals)) @ vecs.T
    b_half = np.kron(b_half_small, np.eye(problem.m))
    ht = h_tilde(problem)
    sym = b_half @ ht @ b_half
    sym = 0.5 * (sym + sym.T)
    lam = float(np.linalg.eigvalsh(sym)[-1])
    return 1.0 / (2.0 * lam)


def conservative_bound(graph: Graph, problem: LinearProblem) -> float:
    """Degree-based lower estimate of the critical step-size.

    2 / ((max_i d_i + 1)^2 * max_i ||h_i||^2) with d_i the weighted
    degree. Both maxima are obtainable in-network by max-consensus, so
    nodes can bound the step-size without any global computation.
    """
    if graph.directed:
        raise ValueError("the conservative bound applies to undirected graphs")
    degs = degrees(graph)
    d_max = max(d[2] for d in degs)
    return 2.0 / ((d_max + 1.0) ** 2 * lambda_max_htilde(problem))


def max_consensus(graph: Graph, local_values) -> tuple:
    """Iterated local maxima over in-neighbors (self-inclusive).

    Returns (per-node values, rounds used). On a connected graph all
    nodes hold the global maximum after at most N-1 rounds; the returned
    round count is the number of rounds that changed at least one value.
    """
    if graph.directed:
        if not is_strongly_connected(graph):
            raise ValueError("graph must be strongly connected")
    else:
        if not is_connected(graph):
            raise ValueError("graph must be connected")
    n = graph.n_nodes
    values = [float(v) for v in local_values]
    if len(values) != n:
        raise ValueError("need one value per node")
    neigh = [graph.in_neighbors(i) for i in range(1, n + 1)]
    rounds = 0
    for _ in range(n - 1):
        new = [max(values[j - 1] for j in neigh[i]) for i in range(n)]
        if new == values:
            break
        values = new
        rounds += 1
    return values, rounds


def find_stable_step_size(mixing, problem: LinearProblem,
                          max_halvings: int = 60) -> float:
    """Locate a convergent step-size by halving from alpha = 1.

    No closed-form critical value is available for directed networks;
    this utility finds some alpha with verdict converges, or raises if
    none appears within max_halvings halvings.
    """
    alpha = 1.0
    for _ in range(max_halvings + 1):
        mat = _assemble_for(mixing, problem, alpha)
        if convergence_predicate(mat, problem.m).verdict == "converges":
            return alpha
        alpha *= 0.5
    raise RuntimeError("no convergent step-size found by halving from 1")


def stability_threshold(mixing, problem: LinearProblem,
                        rel_tol: float = 1e-3) -> float:
    """Empirical stability boundary located by bisection on alpha.

    Brackets the boundary between a convergent and a non-convergent
    step-size, then bisects until the bracket is relatively tighter than
    rel_tol. Returns the convergent end of the final bracket.
    """
    lo = find_stable_step_size(mixing, problem)
    hi = lo * 2.0
    for _ in range(200):
        mat = _assemble_for(mixing, problem, hi)
        if convergence_predicate(mat, problem.m).verdict != "converges":
            break
        lo = hi
        hi *= 2.0
    else:
        raise RuntimeError("no divergent step-size found above the stable one")
    while (hi - lo) > rel_tol * lo:
        mid = 0.5 * (lo + hi)
        mat = _assemble_for(mixing, problem, mid)
        if convergence_predicate(mat, problem.m).verdict == "converges":
            lo = mid
        else:
            hi = mid
    return lo


def _assemble_for(mixing, problem: LinearProblem, alpha: float) -> ClosedLoopMatrix:
    if isinstance(mixing, MixingUndirected):
        return assemble_m_undirected(mixing, problem, alpha)
    if isinstance(mixing, MixingDirected):
        return assemble_m_directed(mixing, problem, alpha)
    raise TypeError("mixing must be MixingUndirected or MixingDirected")


def report_to_dict(report: SpectralReport) -> dict:
    return {
        "eigenvalues": [[float(ev.real), float(ev.imag)]
                        for ev in report.eigenvalues],
        "count_at_one": report.count_at_one,
        "semisimple": report.semisimple_at_one,
        "rho_rest": report.spectral_radius_rest,
        "alpha_bar": report.alpha_bar,
        "verdict": report.verdict,
    }


def report_from_dict(data: dict) -> SpectralReport:
    eigs = np.array([complex(re, im) for re, im in data["eigenvalues"]])
    return SpectralReport(
        eigenvalues=eigs,
        count_at_one=int(data["count_at_one"]),
        semisimple_at_one=bool(data["semisimple"]),
        spectral_radius_rest=float(data["rho_rest"]),
        verdict=data["verdict"],
        alpha_bar=data.get("alpha_bar"),
    )
