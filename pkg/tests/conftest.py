import numpy as np
import pytest

from netlsq.graphs import random_connected_graph, random_strong_digraph
from netlsq.mixing import build_pq, build_w_laplacian
from netlsq.problem import random_problem
from netlsq.scenario import bundled_scenario_path, load_scenario
from netlsq.spectral import critical_step_size, find_stable_step_size


@pytest.fixture(scope="session")
def ex1():
    return load_scenario(bundled_scenario_path(1))


@pytest.fixture(scope="session")
def ex2():
    return load_scenario(bundled_scenario_path(2))


@pytest.fixture(scope="session")
def ex3():
    return load_scenario(bundled_scenario_path(3))


def make_undirected_instance(rng):
    """Random connected undirected instance with a provably safe step-size."""
    n = int(rng.integers(2, 7))
    m = int(rng.integers(1, min(n, 3) + 1))
    graph = random_connected_graph(n, rng)
    mixing = build_w_laplacian(graph)
    problem = random_problem(n, m, rng)
    alpha = 0.5 * critical_step_size(mixing, problem)
    return graph, mixing, problem, alpha


def make_directed_instance(rng):
    """Random strongly connected directed instance with a convergent
    step-size found by halving."""
    n = int(rng.integers(2, 7))
    m = int(rng.integers(1, min(n, 3) + 1))
    graph = random_strong_digraph(n, rng)
    mixing = build_pq(graph)
    problem = random_problem(n, m, rng)
    alpha = find_stable_step_size(mixing, problem)
    return graph, mixing, problem, alpha


def random_x0(rng, problem):
    return rng.uniform(-3.0, 3.0, problem.n_nodes * problem.m)


def make_well_conditioned_instance(rng, rho_max=0.9):
    """Random convergent instance whose non-unity spectrum is comfortably
    inside the unit circle.

    Near-marginal instances (rho close to 1) are legitimate inputs but
    their slow modes make the kernel-sum denominator of the finite-time
    mechanism collapse, which is a double-precision wall rather than a
    property of the implementation; the recovery batteries therefore
    sample instances with rho <= rho_max.
    """
    from netlsq.spectral import (
        assemble_m_directed,
        assemble_m_undirected,
        convergence_predicate,
    )

    while True:
        directed = bool(rng.integers(0, 2))
        if directed:
            graph, mixing, problem, _ = make_directed_instance(rng)
            alphas = (0.3, 0.2, 0.1, 0.05, 0.02)
            assemble = assemble_m_directed
        else:
            graph, mixing, problem, alpha = make_undirected_instance(rng)
            bar = 2.0 * alpha
            alphas = (0.5 * bar, 0.7 * bar, 0.3 * bar)
            assemble = assemble_m_undirected
        for alpha in alphas:
            report = convergence_predicate(assemble(mixing, problem, alpha),
                                           problem.m)
            if report.verdict == "converges" and \
                    report.spectral_radius_rest <= rho_max:
                return graph, mixing, problem, alpha
