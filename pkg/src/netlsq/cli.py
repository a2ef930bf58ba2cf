"""Command-line interface.

Exit codes: 0 success, 1 assertion or validation failure, 2 input error
(unreadable file, malformed JSON, inconsistent dimensions).
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .finite_time import (
    FiniteTimeError,
    node_stream,
    result_to_dict,
    run_finite_time,
)
from .mixing import MixingUndirected
from .problem import direct_least_squares
from .scenario import (
    RunReport,
    Scenario,
    ScenarioError,
    load_scenario,
    report_to_json_dict,
    reproduce_example,
    run_scenario,
)
from .solver import run
from .spectral import (
    conservative_bound,
    convergence_predicate,
    critical_step_size,
    max_consensus,
    report_to_dict,
)
from .graphs import degrees


def _load(args) -> Scenario:
    scenario = load_scenario(args.scenario)
    if getattr(args, "seed", None) is not None:
        rng = np.random.default_rng(args.seed)
        nm = scenario.problem.n_nodes * scenario.problem.m
        import dataclasses

        scenario = dataclasses.replace(
            scenario, x0=rng.uniform(-3.0, 3.0, nm))
    return scenario


def _emit(data) -> None:
    json.dump(data, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def _cmd_solve(args) -> int:
    scenario = _load(args)
    report = run_scenario(scenario, out_dir=args.out)
    oracle = direct_least_squares(scenario.problem)
    _emit(report_to_json_dict(report, oracle))
    return 0


def _cmd_analyze(args) -> int:
    scenario = _load(args)
    from .scenario import _assemble

    alpha = args.alpha if args.alpha is not None else scenario.solver.step_size
    mat = _assemble(scenario, alpha)
    report = convergence_predicate(mat, scenario.problem.m)
    data = report_to_dict(report)
    data["alpha"] = alpha
    _emit(data)
    return 0


def _cmd_critical_alpha(args) -> int:
    scenario = _load(args)
    if not isinstance(scenario.mixing, MixingUndirected):
        print("critical-alpha requires an undirected scenario",
              file=sys.stderr)
        return 2
    _emit({"alpha_bar": critical_step_size(scenario.mixing,
                                           scenario.problem)})
    return 0


def _cmd_bound(args) -> int:
    scenario = _load(args)
    if scenario.graph.directed:
        print("bound requires an undirected scenario", file=sys.stderr)
        return 2
    graph, problem = scenario.graph, scenario.problem
    degs = [d[2] for d in degrees(graph)]
    norms = [float(problem.h[i] @ problem.h[i])
             for i in range(problem.n_nodes)]
    deg_vals, deg_rounds = max_consensus(graph, degs)
    norm_vals, norm_rounds = max_consensus(graph, norms)
    _emit({
        "bound": conservative_bound(graph, problem),
        "max_degree": deg_vals[0],
        "rounds_degree": deg_rounds,
        "max_h_norm_sq": norm_vals[0],
        "rounds_h_norm_sq": norm_rounds,
    })
    return 0


def _cmd_finite_time(args) -> int:
    scenario = _load(args)
    problem = scenario.problem
    n, m = problem.n_nodes, problem.m
    result = run(problem, scenario.graph, scenario.mixing, scenario.solver,
                 scenario.x0)
    nodes = [args.node] if args.node is not None else list(range(1, n + 1))
    reports = []
    failed = False
    for r in nodes:
        try:
            ft = run_finite_time(node_stream(result.trace, r, n, m), m,
                                 k_cap=2 * n * m, node_id=r)
            reports.append(result_to_dict(ft))
        except FiniteTimeError as exc:
            reports.append({"node": r, "error": str(exc)})
            failed = True
    _emit({"verdict": result.verdict, "iterations": result.iterations,
           "finite_time": reports})
    return 1 if failed else 0


def _cmd_reproduce(args) -> int:
    report, checks = reproduce_example(args.which, out_dir=args.out)
    ok = True
    for check in checks:
        status = "PASS" if check["passed"] else "FAIL"
        ok = ok and check["passed"]
        print(f"[{status}] {check['name']}: {check['detail']}")
    print(f"example {args.which}: "
          f"{'all checkpoints passed' if ok else 'checkpoint failures above'}")
    return 0 if ok else 1


def _cmd_validate(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"validation failed: {exc}", file=sys.stderr)
        return 1
    _emit({
        "ok": True,
        "name": scenario.name,
        "n_nodes": scenario.problem.n_nodes,
        "m": scenario.problem.m,
        "directed": scenario.graph.directed,
    })
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netlsq",
        description="Distributed least-squares over networks: simulate, "
                    "analyze step-sizes, and recover exact solutions in "
                    "finite time.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_scenario(p, seed=True):
        p.add_argument("scenario", help="scenario JSON file")
        if seed:
            p.add_argument("--seed", type=int, default=None,
                           help="draw x0 from this seed instead of the file")

    p = sub.add_parser("solve", help="run the solver pipeline")
    add_scenario(p)
    p.add_argument("--out", default=None, help="directory for trace/report")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("analyze", help="spectral convergence analysis")
    add_scenario(p)
    p.add_argument("--alpha", type=float, default=None,
                   help="step-size to analyze (default: scenario's)")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("critical-alpha",
                       help="exact critical step-size (undirected)")
    add_scenario(p, seed=False)
    p.set_defaults(func=_cmd_critical_alpha)

    p = sub.add_parser("bound",
                       help="conservative step-size bound via max-consensus")
    add_scenario(p, seed=False)
    p.set_defaults(func=_cmd_bound)

    p = sub.add_parser("finite-time",
                       help="finite-time exact recovery from node traces")
    add_scenario(p)
    p.add_argument("--node", type=int, default=None,
                   help="recover at this node only (default: all)")
    p.set_defaults(func=_cmd_finite_time)

    p = sub.add_parser("reproduce-example",
                       help="run a bundled example and grade its checkpoints")
    p.add_argument("which", type=int, choices=(1, 2, 3))
    p.add_argument("--out", default=None, help="directory for trace/report")
    p.set_defaults(func=_cmd_reproduce)

    p = sub.add_parser("validate", help="parse and validate a scenario file")
    p.add_argument("scenario", help="scenario JSON file")
    p.set_defaults(func=_cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"input error: malformed JSON ({exc})", file=sys.stderr)
        return 2
    except (ScenarioError, KeyError, ValueError, TypeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
