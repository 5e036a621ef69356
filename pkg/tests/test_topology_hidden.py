import numpy as np
import pytest

from rgsp.errors import DimensionMismatch, InvalidParams, NonConvergence, ZeroReference
from rgsp.graph_core import random_graph
from rgsp.solvers import SolverReport
from rgsp.topology_hidden import (
    HiddenObservation,
    JointTopoProblem,
    TopoSolution,
    _stagnated,
    column_jaccard,
    commutator_residual,
    full_observation_stationary_solve,
    joint_error,
    planted_hidden,
    planted_joint_instance,
    split_hidden,
    stationarity_operator,
    support_fscore,
    topo_joint_solve,
    topo_single_solve,
)

FAST = dict(max_iter=400, raise_on_cap=False)


@pytest.fixture
def planted():
    gso = random_graph("ER", {"n_nodes": 8, "p": 0.4}, seed=11)
    return planted_hidden(gso, n_hidden=1, seed=2)


def _assert_adjacency(S):
    np.testing.assert_allclose(S, S.T, atol=1e-12)
    assert (S >= 0).all()
    np.testing.assert_array_equal(np.diag(S), 0.0)
    assert (S.sum(axis=1) >= 1.0 - 1e-9).all()


def test_planted_footprint_closes_the_commutator(planted):
    obs = planted.observation
    assert obs.n_observed == 7
    scale = np.linalg.norm(obs.C_O) * np.linalg.norm(planted.S_O)
    assert commutator_residual(obs.C_O, planted.S_O, planted.P) <= 1e-12 * scale
    full = planted.C @ planted.S - planted.S @ planted.C
    assert np.linalg.norm(full) <= 1e-12 * np.linalg.norm(planted.C) * np.linalg.norm(planted.S)


def test_stationarity_operator_matches_direct_map(rng):
    C = rng.standard_normal((5, 5))
    C = C + C.T
    S, P = rng.standard_normal((2, 5, 5))
    A = stationarity_operator(C, hidden=True)
    stacked = np.concatenate([S.ravel(order="F"), P.ravel(order="F")])
    expected = C @ S - S @ C + P - P.T
    np.testing.assert_allclose(A @ stacked, expected.ravel(order="F"), atol=1e-12)
    assert stationarity_operator(C, hidden=False).shape == (25, 25)


def test_split_hidden_blocks(planted):
    C_O, S_O, P = split_hidden(planted.S, planted.C, 1)
    np.testing.assert_array_equal(S_O, planted.S[:7, :7])
    np.testing.assert_allclose(P, planted.C[:7, 7:] @ planted.S[7:, :7])
    with pytest.raises(InvalidParams):
        split_hidden(planted.S, planted.C, 8)


def test_observation_from_signals(rng):
    X = rng.standard_normal((4, 50))
    obs = HiddenObservation.from_signals(X, n_hidden=1)
    assert obs.C_O.shape == (4, 4)
    with pytest.raises(DimensionMismatch):
        HiddenObservation(C_O=np.ones((3, 4)))
    with pytest.raises(InvalidParams):
        HiddenObservation(C_O=np.eye(3), n_hidden=-1)


def test_joint_error_normalizes_per_graph():
    A = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert joint_error([A, 10 * A], [A, 10 * A]) == 0.0
    assert joint_error([np.zeros((2, 2))], [A]) == pytest.approx(1.0)
    assert joint_error([np.zeros((2, 2)), 10 * A], [A, 10 * A]) == pytest.approx(0.5)
    with pytest.raises(ZeroReference):
        joint_error([A], [np.zeros((2, 2))])
    with pytest.raises(DimensionMismatch):
        joint_error([A], [A, A])


def test_support_fscore():
    truth = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)
    assert support_fscore(truth, truth) == 1.0
    assert support_fscore(np.zeros((3, 3)), truth) == 0.0
    half = np.array([[0, 1, 1], [1, 0, 0], [1, 0, 0]], dtype=float)
    assert support_fscore(half, truth) == pytest.approx(0.5)


def test_column_jaccard():
    P0 = np.zeros((3, 3))
    P0[:, 0] = 1.0
    P1 = np.zeros((3, 3))
    P1[:, [0, 2]] = 1.0
    solution = TopoSolution(S_list=[np.eye(3)] * 2, P_list=[P0, P1], report=SolverReport())
    assert column_jaccard(solution) == pytest.approx(0.5)
    assert solution.group_sparsity() == [1, 2]
    single = TopoSolution(S_list=[np.eye(3)], P_list=[None], report=SolverReport())
    assert column_jaccard(single) == 1.0
    assert single.active_columns()[0].size == 0


@pytest.mark.parametrize("p_penalty", ["nuclear", "group"])
def test_single_solve_stays_in_the_adjacency_set(planted, p_penalty):
    solution = topo_single_solve(
        planted.observation, variant="ReweightedNuclear", passes=2, p_penalty=p_penalty, **FAST
    )
    _assert_adjacency(solution.S)
    assert solution.P.shape == (7, 7)
    assert len(solution.report.extra["support_per_pass"]) == 2
    assert len(solution.graphs()) == 1


def test_constrained_mode_with_a_loose_ball(planted):
    solution = topo_single_solve(planted.observation, eps=1e3, **FAST)
    _assert_adjacency(solution.S)
    assert solution.report.flags["constraint_active"] is False


def test_tight_ball_with_a_short_run_is_not_reported_infeasible(planted):
    solution = topo_single_solve(planted.observation, eps=1e-2, max_iter=60, raise_on_cap=False)
    _assert_adjacency(solution.S)
    assert "constraint_active" in solution.report.flags


def test_stagnation_needs_a_full_window():
    assert not _stagnated([1.0] * 10, window=500)
    assert _stagnated([1.0] * 600, window=500)
    assert not _stagnated(list(np.geomspace(1.0, 1e-3, 600)), window=500)


def test_full_observation_solve():
    gso = random_graph("ER", {"n_nodes": 7, "p": 0.5}, seed=4)
    inst = planted_hidden(gso, n_hidden=0, seed=1)
    S = full_observation_stationary_solve(inst.C, **FAST)
    _assert_adjacency(S)


def test_single_solve_errors(planted):
    with pytest.raises(InvalidParams):
        topo_single_solve(planted.observation, variant="Nuclear")
    with pytest.raises(InvalidParams):
        topo_single_solve(planted.observation, p_penalty="trace")
    with pytest.raises(InvalidParams):
        topo_single_solve(planted.observation, gamma=-1.0)
    with pytest.raises(NonConvergence):
        topo_single_solve(planted.observation, max_iter=1)


def test_joint_solve_on_identical_graphs_gives_identical_estimates(planted):
    problem = JointTopoProblem(2, passes=2)
    solution = topo_joint_solve(problem, [planted.observation] * 2, **FAST)
    np.testing.assert_allclose(solution.S_list[0], solution.S_list[1], atol=1e-10)
    for S in solution.S_list:
        _assert_adjacency(S)
    assert column_jaccard(solution) == 1.0


def test_joint_solve_on_related_graphs():
    instances = planted_joint_instance(8, 0.4, n_graphs=3, n_hidden=1, rewire_fraction=0.1, seed=5)
    problem = JointTopoProblem(3, passes=1)
    solution = topo_joint_solve(problem, [inst.observation for inst in instances], **FAST)
    assert len(solution.S_list) == 3
    error = joint_error(solution.S_list, [inst.S_O for inst in instances])
    assert np.isfinite(error) and error >= 0.0


def test_hidden_unaware_joint_solve(planted):
    problem = JointTopoProblem(2, passes=1, hidden_aware=False)
    solution = topo_joint_solve(problem, [planted.observation] * 2, **FAST)
    assert solution.P_list == [None, None]
    assert solution.group_sparsity() == [0, 0]


def test_joint_problem_validation(planted):
    with pytest.raises(InvalidParams):
        JointTopoProblem(0)
    with pytest.raises(InvalidParams):
        JointTopoProblem(2, alpha=[1.0, 1.0, 1.0])
    with pytest.raises(InvalidParams):
        JointTopoProblem(2, beta=-np.ones((2, 2)))
    with pytest.raises(InvalidParams):
        JointTopoProblem(2, passes=0)
    with pytest.raises(DimensionMismatch):
        topo_joint_solve(JointTopoProblem(3), [planted.observation] * 2)
    problem = JointTopoProblem(2, mu=100.0)
    problem.scale_mu_for_samples(n_samples=70, n_observed=30)
    np.testing.assert_allclose(problem.mu, [70.0, 70.0])
