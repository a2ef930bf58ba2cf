"""Time the compiled round loop against the pure-Python reference.

Usage: python3 benchmarks/compare_backends.py [--iters 2000] [--repeats 5]

Both kernels produce bitwise-identical traces (the test suite asserts
this), so the comparison is purely about speed. The reference kernel
routes every read through a per-round message buffer, which is the
point of it; expect two to three orders of magnitude.
"""
import argparse
import time

import numpy as np

from netlsq import kernels
from netlsq.graphs import random_connected_graph
from netlsq.mixing import build_w_laplacian
from netlsq.problem import LinearProblem
from netlsq.scenario import bundled_scenario_path, load_scenario
from netlsq.solver import init_states
from netlsq.spectral import critical_step_size, find_stable_step_size


def _case_bundled():
    scenario = load_scenario(bundled_scenario_path(1))
    return ("example1 (N=4, m=2)", scenario.problem, scenario.mixing,
            scenario.x0, 0.1857)


def _case_random(n, m, seed):
    rng = np.random.default_rng(seed)
    graph = random_connected_graph(n, rng)
    mixing = build_w_laplacian(graph)
    h = rng.uniform(-2.0, 2.0, (n, m))
    z = rng.uniform(-2.0, 2.0, n)
    problem = LinearProblem(h=h, z=z)
    try:
        alpha = 0.5 * critical_step_size(mixing, problem)
    except Exception:
        alpha = find_stable_step_size(mixing, problem)
    x0 = rng.uniform(-3.0, 3.0, n * m)
    return (f"random (N={n}, m={m})", problem, mixing, x0, alpha)


def _run_once(backend, plan, problem, x0, v0, alpha, iters):
    start = time.perf_counter()
    _, _, done, _, _ = kernels.run_rounds(
        plan, problem.h, problem.z, x0, v0, alpha, iters,
        kernels.STOP_NONE, 0.0, None, 1e12, False, backend=backend,
    )
    elapsed = time.perf_counter() - start
    assert done == iters
    return elapsed


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--iters", type=int, default=2000)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    try:
        kernels.get_backend("compiled")
    except ImportError:
        print("compiled extension not built; nothing to compare")
        return

    cases = [
        _case_bundled(),
        _case_random(16, 2, seed=7),
        _case_random(40, 3, seed=8),
    ]
    print(f"{args.iters} rounds, best of {args.repeats}")
    header = f"{'case':<22}{'python':>12}{'compiled':>12}{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for label, problem, mixing, x0, alpha in cases:
        if hasattr(mixing, "w"):
            plan = kernels.build_plan(mixing.w, mixing.w)
        else:
            plan = kernels.build_plan(mixing.p, mixing.q)
        init = init_states(problem, x0)
        sx, sv = init.stacked_x(), init.stacked_v()
        times = {}
        for backend in ("python", "compiled"):
            times[backend] = min(
                _run_once(backend, plan, problem, sx, sv, alpha, args.iters)
                for _ in range(args.repeats)
            )
        print(f"{label:<22}{times['python']:>10.4f}s"
              f"{times['compiled']:>10.4f}s"
              f"{times['python'] / times['compiled']:>9.1f}x")


if __name__ == "__main__":
    main()
