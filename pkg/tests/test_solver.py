import numpy as np
import pytest

from netlsq import kernels
from netlsq.graphs import Graph
from netlsq.kernels import reference
from netlsq.mixing import MixingUndirected, build_w_laplacian
from netlsq.problem import (
    LinearProblem,
    direct_least_squares,
    stacked_gradient,
)
from netlsq.solver import (
    SolverConfig,
    init_states,
    run,
    step,
    write_trace_csv,
)
from netlsq.spectral import assemble_m_directed, assemble_m_undirected
from tests.conftest import (
    make_directed_instance,
    make_undirected_instance,
    random_x0,
)

X0_EX1 = np.array([4.0, 1.0, 2.0, -2.0, -1.0, 1.0, -2.0, -1.0])
V0_EX1 = np.array([0.0, 2.0, 18.0, 0.0, 0.0, 0.0, -4.0, 0.0])


def exact_consistent_instance():
    """Two-node instance whose arithmetic stays exact in doubles.

    The complete 2-node graph gives W with entries 0.5, and integer data
    keeps every product and sum representable, so the solution is a
    bitwise fixed point.
    """
    graph = Graph(n_nodes=2, edges=[(1, 2, 1.0)], directed=False)
    mixing = build_w_laplacian(graph)  # tau = 2, all entries 0.5
    y = np.array([3.0, -5.0])
    h = np.array([[1.0, 0.0], [0.0, 1.0]])
    z = h @ y
    problem = LinearProblem(h=h, z=z)
    return graph, mixing, problem, y


def test_init_states_reference_values(ex1):
    state = init_states(ex1.problem, X0_EX1)
    assert np.array_equal(state.stacked_v(), V0_EX1)
    assert state.iteration == 0


def test_init_states_at_origin(ex1):
    state = init_states(ex1.problem, np.zeros(8))
    expected = np.concatenate(
        [-ex1.problem.z[i] * ex1.problem.h[i] for i in range(4)])
    assert np.array_equal(state.stacked_v(), expected)


def test_init_states_dimension_check(ex1):
    with pytest.raises(ValueError):
        init_states(ex1.problem, np.zeros(7))


def test_solution_is_exact_fixed_point():
    graph, mixing, problem, y = exact_consistent_instance()
    x0 = np.tile(y, 2)
    state = init_states(problem, x0)
    assert np.array_equal(state.stacked_v(), np.zeros(4))
    config = SolverConfig(step_size=0.2)
    nxt = step(state, mixing, config, problem)
    assert np.array_equal(nxt.stacked_x(), x0)
    assert np.array_equal(nxt.stacked_v(), np.zeros(4))


def test_limit_point_is_stationary(ex1):
    # the limit pair is consensus on y* with a zero tracker; on the
    # inconsistent bundled problem the local gradients there are nonzero
    # but cancel, so v = 0 (not init_states) is the stationary tracker
    from netlsq.solver import NetworkState, NodeState

    y = direct_least_squares(ex1.problem)
    x0 = np.tile(y, 4)
    state = NetworkState(states=[
        NodeState(x=y.copy(), v=np.zeros(2)) for _ in range(4)
    ])
    config = SolverConfig(step_size=0.1857)
    nxt = state
    for _ in range(5):
        nxt = step(nxt, ex1.mixing, config, ex1.problem)
    assert np.max(np.abs(nxt.stacked_x() - x0)) <= 1e-14
    assert np.max(np.abs(nxt.stacked_v())) <= 1e-13


def test_zero_step_size_is_pure_consensus(ex1):
    # config forbids alpha = 0, so drive the kernel directly
    plan = kernels.build_plan(ex1.mixing.w, ex1.mixing.w)
    rng = np.random.default_rng(3)
    x0 = rng.uniform(-2, 2, 8)
    v0 = stacked_gradient(ex1.problem, x0)
    x, _, _, _, trace = kernels.run_rounds(
        plan, ex1.problem.h, ex1.problem.z, x0, v0, 0.0, 100,
        kernels.STOP_NONE, 0.0, None, 1e12, True)
    w_kron = np.kron(ex1.mixing.w, np.eye(2))
    expected = np.linalg.matrix_power(w_kron, 100) @ x0
    assert np.max(np.abs(x - expected)) <= 1e-10
    # doubly stochastic averaging conserves the component sums
    sums0 = x0.reshape(4, 2).sum(axis=0)
    for t in range(trace.shape[0]):
        sums = trace[t, :8].reshape(4, 2).sum(axis=0)
        assert np.max(np.abs(sums - sums0)) <= 1e-12


def test_one_step_equals_closed_loop_matrix(ex1):
    alpha = 0.1857
    state = init_states(ex1.problem, X0_EX1)
    nxt = step(state, ex1.mixing, SolverConfig(step_size=alpha), ex1.problem)
    mat = assemble_m_undirected(ex1.mixing, ex1.problem, alpha).m_matrix
    expected = mat @ np.concatenate([X0_EX1, V0_EX1])
    got = np.concatenate([nxt.stacked_x(), nxt.stacked_v()])
    assert np.max(np.abs(got - expected)) <= 1e-12


def _linear_equivalence(problem, mixing, alpha, x0, steps=50, directed=False):
    state = init_states(problem, x0)
    assemble = assemble_m_directed if directed else assemble_m_undirected
    mat = assemble(mixing, problem, alpha).m_matrix
    z0 = np.concatenate([state.stacked_x(), state.stacked_v()])
    expected = np.linalg.matrix_power(mat, steps) @ z0
    config = SolverConfig(step_size=alpha, max_iterations=steps,
                          stop_rule="none")
    result = run(problem, None, mixing, config, x0)
    got = np.concatenate([result.state.stacked_x(),
                          result.state.stacked_v()])
    scale = max(1.0, float(np.max(np.abs(expected))))
    return float(np.max(np.abs(got - expected))) / scale


def test_linear_equivalence_examples(ex1, ex3):
    assert _linear_equivalence(ex1.problem, ex1.mixing, 0.1857, X0_EX1) <= 1e-8
    assert _linear_equivalence(ex3.problem, ex3.mixing, 0.1, X0_EX1,
                               directed=True) <= 1e-8


def test_linear_equivalence_random_battery():
    rng = np.random.default_rng(2024)
    for i in range(10):
        if i % 2 == 0:
            _, mixing, problem, alpha = make_undirected_instance(rng)
            directed = False
        else:
            _, mixing, problem, alpha = make_directed_instance(rng)
            directed = True
        x0 = random_x0(rng, problem)
        err = _linear_equivalence(problem, mixing, alpha, x0,
                                  directed=directed)
        assert err <= 1e-8, err


def test_tracking_sum_conservation_battery():
    rng = np.random.default_rng(314)
    for _ in range(20):
        _, mixing, problem, alpha = make_undirected_instance(rng)
        n, m = problem.n_nodes, problem.m
        x0 = random_x0(rng, problem)
        config = SolverConfig(step_size=alpha, max_iterations=300,
                              stop_rule="none")
        result = run(problem, None, mixing, config, x0)
        for t in range(result.trace.shape[0]):
            row = result.trace[t]
            v_sum = row[n * m:].reshape(n, m).sum(axis=0)
            g_sum = stacked_gradient(problem, row[:n * m]).reshape(
                n, m).sum(axis=0)
            assert np.max(np.abs(v_sum - g_sum)) <= 1e-9


class RecordingBuffer(reference.RoundBuffer):
    reads = []

    def read_x(self, reader, j):
        RecordingBuffer.reads.append((reader, j))
        return super().read_x(reader, j)

    def read_v(self, reader, j):
        RecordingBuffer.reads.append((reader, j))
        return super().read_v(reader, j)


def test_message_buffer_audit(ex3):
    """Every payload a node touches must come from an in-neighbor."""
    problem, mixing, graph = ex3.problem, ex3.mixing, ex3.graph
    plan = kernels.build_plan(mixing.p, mixing.q)
    RecordingBuffer.reads = []
    reference.run_rounds(
        4, 2, plan.p_indptr, plan.p_indices, plan.p_weights,
        plan.q_indptr, plan.q_indices, plan.q_weights,
        problem.h, problem.z, X0_EX1, stacked_gradient(problem, X0_EX1),
        0.1, 5, reference.STOP_NONE, 0.0, None, 1e12, False,
        buffer_factory=RecordingBuffer)
    assert RecordingBuffer.reads
    allowed = {i: set(graph.in_neighbors(i)) for i in range(1, 5)}
    for reader, j in RecordingBuffer.reads:
        assert (j + 1) in allowed[reader + 1], (
            f"node {reader + 1} read node {j + 1}, not an in-neighbor")
    # and the mixing actually uses every in-neighbor of every node
    touched = {(r, j) for r, j in RecordingBuffer.reads}
    for i in range(1, 5):
        for j in graph.in_neighbors(i):
            assert (i - 1, j - 1) in touched


def test_oracle_stop_rule(ex1):
    config = SolverConfig(step_size=0.1857, max_iterations=40000,
                          stop_tolerance=1e-3, stop_rule="oracle")
    result = run(ex1.problem, ex1.graph, ex1.mixing, config, X0_EX1)
    assert result.verdict == "converged"
    oracle = direct_least_squares(ex1.problem)
    err = np.max(np.abs(result.state.stacked_x().reshape(4, 2) - oracle))
    assert err <= 1e-3
    # the trace includes the initial state and every iteration
    assert result.trace.shape == (result.iterations + 1, 16)
    assert np.array_equal(result.trace[0, :8], X0_EX1)


def test_successive_stop_rule(ex1):
    config = SolverConfig(step_size=0.1857, max_iterations=40000,
                          stop_tolerance=1e-12, stop_rule="successive")
    result = run(ex1.problem, ex1.graph, ex1.mixing, config, X0_EX1)
    assert result.verdict == "converged"
    last, prev = result.trace[-1, :8], result.trace[-2, :8]
    assert np.max(np.abs(last - prev)) <= 1e-12


def test_stop_rule_none_runs_to_the_end(ex1):
    config = SolverConfig(step_size=0.1857, max_iterations=123,
                          stop_rule="none")
    result = run(ex1.problem, None, ex1.mixing, config, X0_EX1)
    assert result.verdict == "max_iters"
    assert result.iterations == 123


def test_divergence_guard_trips(ex1):
    config = SolverConfig(step_size=0.5, max_iterations=5000,
                          stop_rule="none")
    result = run(ex1.problem, None, ex1.mixing, config, X0_EX1)
    assert result.verdict == "diverged"
    final = np.concatenate([result.state.stacked_x(),
                            result.state.stacked_v()])
    assert np.max(np.abs(final)) > 1e12


def test_start_at_oracle_converges_immediately(ex1):
    y = direct_least_squares(ex1.problem)
    config = SolverConfig(step_size=0.1857, stop_tolerance=1e-6)
    result = run(ex1.problem, None, ex1.mixing, config, np.tile(y, 4))
    assert result.verdict == "converged"
    assert result.iterations == 0


def test_converged_nodes_agree(ex1):
    config = SolverConfig(step_size=0.1857, max_iterations=40000,
                          stop_tolerance=1e-3)
    result = run(ex1.problem, ex1.graph, ex1.mixing, config, X0_EX1)
    xs = result.state.stacked_x().reshape(4, 2)
    for i in range(4):
        for j in range(i + 1, 4):
            assert np.max(np.abs(xs[i] - xs[j])) <= 10 * 1e-3


def test_invalid_mixing_rejected(ex1):
    bad = MixingUndirected(w=np.eye(4))
    config = SolverConfig(step_size=0.1)
    with pytest.raises(ValueError):
        run(ex1.problem, ex1.graph, bad, config, X0_EX1)


def test_trace_csv_format_and_determinism(tmp_path, ex1):
    config = SolverConfig(step_size=0.1857, max_iterations=50,
                          stop_rule="none")
    result = run(ex1.problem, None, ex1.mixing, config, X0_EX1)
    oracle = direct_least_squares(ex1.problem)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_trace_csv(p1, result.trace, 2, oracle=oracle)
    write_trace_csv(p2, result.trace, 2, oracle=oracle)
    assert p1.read_bytes() == p2.read_bytes()
    lines = p1.read_text().splitlines()
    assert lines[0] == "t,node,x_1,x_2,v_1,v_2,err_inf"
    assert len(lines) == 1 + 51 * 4
    first = lines[1].split(",")
    assert first[0] == "0" and first[1] == "1"
    assert float(first[2]) == 4.0 and float(first[3]) == 1.0
    # err_inf column holds the per-node distance to the oracle
    err = float(first[6])
    assert err == pytest.approx(np.max(np.abs(X0_EX1[:2] - oracle)), abs=0)


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(step_size=0.0)
    with pytest.raises(ValueError):
        SolverConfig(step_size=0.1, max_iterations=0)
    with pytest.raises(ValueError):
        SolverConfig(step_size=0.1, stop_rule="banana")
