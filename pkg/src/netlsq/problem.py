"""Row-partitioned over-determined linear systems and their least-squares
oracle.

Node i privately holds one row: a coefficient vector h_i and a scalar
observation z_i. The network's job is to agree on the minimizer of
(1/2)||z - H y||^2 where H stacks all rows. Everything here is centralized
reference machinery: the oracle, gradients, and the stacked block forms the
spectral analysis needs.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "LinearProblem",
    "local_gradient",
    "stacked_gradient",
    "direct_least_squares",
    "residual",
    "lambda_max_htilde",
    "h_tilde",
    "z_h",
    "random_problem",
    "problem_from_dict",
    "problem_to_dict",
    "load_problem",
    "save_problem",
]

# numerical full-column-rank test: sigma_min/sigma_max
RANK_TOL = 1e-10


@dataclass(frozen=True)
class LinearProblem:
    """N x m stacked system with per-node rows.

    Attributes
    ----------
    h : ndarray, shape (N, m)
        Row i is node i's coefficient vector h_i.
    z : ndarray, shape (N,)
        Per-node observations.
    """

    h: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        h = np.atleast_2d(np.asarray(self.h, dtype=float))
        z = np.asarray(self.z, dtype=float).ravel()
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "z", z)
        if h.shape[0] != z.shape[0]:
            raise ValueError(f"{h.shape[0]} rows but {z.shape[0]} observations")
        if h.shape[0] < h.shape[1]:
            raise ValueError("system must be square or over-determined (N >= m)")
        sv = np.linalg.svd(h, compute_uv=False)
        if sv[-1] <= RANK_TOL * sv[0]:
            raise ValueError("H is numerically rank-deficient; the least-squares solution is not unique")

    @property
    def n_nodes(self) -> int:
        return self.h.shape[0]

    @property
    def m(self) -> int:
        return self.h.shape[1]


def local_gradient(h: np.ndarray, z: float, x: np.ndarray) -> np.ndarray:
    """Gradient of node i's cost (1/2)(h'x - z)^2, namely h (h'x) - z h."""
    h = np.asarray(h, dtype=float).ravel()
    x = np.asarray(x, dtype=float).ravel()
    if h.shape != x.shape:
        raise ValueError(f"h has length {h.shape[0]} but x has length {x.shape[0]}")
    return h * (h @ x) - z * h


def stacked_gradient(problem: LinearProblem, x: np.ndarray) -> np.ndarray:
    """Concatenation of all local gradients at the stacked point x."""
    x = np.asarray(x, dtype=float).ravel()
    n, m = problem.n_nodes, problem.m
    if x.shape[0] != n * m:
        raise ValueError(f"x has length {x.shape[0]}, expected {n * m}")
    out = np.empty(n * m)
    for i in range(n):
        out[i * m:(i + 1) * m] = local_gradient(problem.h[i], problem.z[i], x[i * m:(i + 1) * m])
    return out


def direct_least_squares(problem: LinearProblem) -> np.ndarray:
    """Centralized oracle: the unique least-squares solution of H y = z.

    Uses an orthogonal factorization of H (never the explicit inverse of
    the normal equations), so test paths that do form H'H stay independent
    of the oracle.
    """
    y, *_ = np.linalg.lstsq(problem.h, problem.z, rcond=None)
    return y


def residual(problem: LinearProblem, y: np.ndarray) -> float:
    """Objective value (1/2)||z - H y||^2 at the candidate y."""
    y = np.asarray(y, dtype=float).ravel()
    r = problem.z - problem.h @ y
    return 0.5 * float(r @ r)


def lambda_max_htilde(problem: LinearProblem) -> float:
    """Largest eigenvalue of the block-diagonal stacked matrix: each block
    h_i h_i' has eigenvalues {||h_i||^2, 0, ...}, so this is max ||h_i||^2."""
    return float(max(np.dot(row, row) for row in problem.h))


def h_tilde(problem: LinearProblem) -> np.ndarray:
    """Block-diagonal Nm x Nm matrix with blocks h_i h_i'."""
    n, m = problem.n_nodes, problem.m
    out = np.zeros((n * m, n * m))
    for i in range(n):
        out[i * m:(i + 1) * m, i * m:(i + 1) * m] = np.outer(problem.h[i], problem.h[i])
    return out


def z_h(problem: LinearProblem) -> np.ndarray:
    """Stacked vector of z_i h_i blocks."""
    return (problem.z[:, None] * problem.h).ravel()


def random_problem(n: int, m: int, rng: np.random.Generator) -> LinearProblem:
    """Seeded generator with entries uniform in [-3, 3], redrawn until the
    full-column-rank check passes."""
    while True:
        h = rng.uniform(-3.0, 3.0, size=(n, m))
        z = rng.uniform(-3.0, 3.0, size=n)
        sv = np.linalg.svd(h, compute_uv=False)
        if sv[-1] > 1e-6 * sv[0]:
            return LinearProblem(h=h, z=z)


def problem_from_dict(d: dict) -> LinearProblem:
    return LinearProblem(h=np.asarray(d["H"], dtype=float), z=np.asarray(d["z"], dtype=float))


def problem_to_dict(problem: LinearProblem) -> dict:
    return {"H": problem.h.tolist(), "z": problem.z.tolist()}


def load_problem(path) -> LinearProblem:
    with open(path) as f:
        return problem_from_dict(json.load(f))


def save_problem(problem: LinearProblem, path) -> None:
    with open(path, "w") as f:
        json.dump(problem_to_dict(problem), f, indent=1)
