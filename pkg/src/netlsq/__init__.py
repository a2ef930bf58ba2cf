"""netlsq: distributed least-squares over networks.

Per-node gradient-tracking iterations for undirected and directed
communication graphs, exact spectral step-size analysis of the stacked
linear system, and finite-time exact recovery of the solution from one
node's own iterates via a Hankel rank test.
"""

from .finite_time import (
    FiniteTimeError,
    FiniteTimeResult,
    HankelObserver,
    build_hankel,
    detect_kernel,
    equilibrate_rows,
    final_value,
    node_stream,
    observe,
    run_finite_time,
)
from .graphs import (
    Graph,
    degrees,
    is_connected,
    is_strongly_connected,
    load_graph,
    random_connected_graph,
    random_strong_digraph,
    save_graph,
)
from .kernels import backend_name
from .mixing import (
    MixingDirected,
    MixingUndirected,
    build_pq,
    build_w_laplacian,
    default_tau,
    laplacian,
    validate_pq,
    validate_w,
)
from .problem import (
    LinearProblem,
    direct_least_squares,
    local_gradient,
    random_problem,
    residual,
    stacked_gradient,
)
from .scenario import (
    RunReport,
    Scenario,
    ScenarioError,
    load_scenario,
    reproduce_example,
    run_scenario,
    save_scenario,
)
from .solver import (
    NetworkState,
    NodeState,
    RunResult,
    SolverConfig,
    init_states,
    run,
    step,
    write_trace_csv,
)
from .spectral import (
    ClosedLoopMatrix,
    SpectralReport,
    assemble_m_directed,
    assemble_m_undirected,
    conservative_bound,
    convergence_predicate,
    critical_step_size,
    find_stable_step_size,
    max_consensus,
    semisimple_one_check,
    stability_threshold,
)

__version__ = "0.1.0"

__all__ = [
    "FiniteTimeError",
    "FiniteTimeResult",
    "HankelObserver",
    "build_hankel",
    "detect_kernel",
    "equilibrate_rows",
    "final_value",
    "node_stream",
    "observe",
    "run_finite_time",
    "Graph",
    "degrees",
    "is_connected",
    "is_strongly_connected",
    "load_graph",
    "random_connected_graph",
    "random_strong_digraph",
    "save_graph",
    "backend_name",
    "MixingDirected",
    "MixingUndirected",
    "build_pq",
    "build_w_laplacian",
    "default_tau",
    "laplacian",
    "validate_pq",
    "validate_w",
    "LinearProblem",
    "direct_least_squares",
    "local_gradient",
    "random_problem",
    "residual",
    "stacked_gradient",
    "RunReport",
    "Scenario",
    "ScenarioError",
    "load_scenario",
    "reproduce_example",
    "run_scenario",
    "save_scenario",
    "NetworkState",
    "NodeState",
    "RunResult",
    "SolverConfig",
    "init_states",
    "run",
    "step",
    "write_trace_csv",
    "ClosedLoopMatrix",
    "SpectralReport",
    "assemble_m_directed",
    "assemble_m_undirected",
    "conservative_bound",
    "convergence_predicate",
    "critical_step_size",
    "find_stable_step_size",
    "max_consensus",
    "semisimple_one_check",
    "stability_threshold",
    "__version__",
]
