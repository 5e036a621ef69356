import numpy as np
import pytest

from rgsp.errors import InfeasiblePerturbation, InvalidParams
from rgsp.graph_core import Gso, GsoKind, random_graph
from rgsp.perturbation import (
    GraphDistanceKind,
    PerturbationMode,
    PerturbationSpec,
    filter_perturbation_bound,
    graph_distance,
    perturb,
    perturbation_from_config,
)


def _n_edges(gso):
    return int(np.count_nonzero(np.triu(gso.matrix, 1)))


def test_rewire_flips_exact_count(er_graph):
    spec = PerturbationSpec.rewire(0.2)
    s_bar, delta = perturb(er_graph, spec, seed=0)
    expected = round(0.2 * _n_edges(er_graph))
    assert graph_distance(er_graph, s_bar) == 2 * expected
    np.testing.assert_array_equal(delta, delta.T)
    np.testing.assert_allclose(s_bar.matrix, er_graph.matrix + delta)
    assert s_bar.kind is GsoKind.ADJACENCY


def test_destroy_only_removes_edges(sbm_graph):
    _, delta = perturb(sbm_graph, PerturbationSpec.rewire(0.3, destroy_share=1.0), seed=1)
    assert (delta <= 0).all()
    assert np.all(sbm_graph.matrix[delta < 0] == 1.0)
    _, delta = perturb(sbm_graph, PerturbationSpec.destroy(0.5), seed=1)
    assert (delta <= 0).all()


def test_create_everything_gives_complete_graph(path_graph):
    s_bar, _ = perturb(path_graph, PerturbationSpec.create(1.0), seed=0)
    n = path_graph.n_nodes
    np.testing.assert_array_equal(s_bar.matrix, np.ones((n, n)) - np.eye(n))


def test_zero_probability_is_identity(er_graph):
    s_bar, delta = perturb(er_graph, PerturbationSpec(p_create=0.0, p_destroy=0.0), seed=3)
    assert not delta.any()
    np.testing.assert_array_equal(s_bar.matrix, er_graph.matrix)


def test_rewire_infeasible_on_near_complete_graph():
    S = np.ones((5, 5)) - np.eye(5)
    S[0, 1] = S[1, 0] = 0.0
    with pytest.raises(InfeasiblePerturbation):
        perturb(Gso(S), PerturbationSpec.rewire(1.0, destroy_share=0.0), seed=0)


def test_weight_noise_keeps_support_nonnegative():
    gso = random_graph("ER", {"n_nodes": 10, "p": 0.5}, seed=2)
    spec = PerturbationSpec(mode=PerturbationMode.WEIGHT_NOISE, sigma=2.0)
    s_bar, _ = perturb(gso, spec, seed=4)
    assert (s_bar.matrix >= 0).all()
    assert not np.any(s_bar.matrix[gso.matrix == 0])


def test_perturbation_is_seeded(er_graph):
    spec = PerturbationSpec(p_create=0.1, p_destroy=0.1)
    a, _ = perturb(er_graph, spec, seed=9)
    b, _ = perturb(er_graph, spec, seed=9)
    np.testing.assert_array_equal(a.matrix, b.matrix)


def test_directed_operator_rejected():
    gso = Gso(np.array([[0.0, 1.0], [0.5, 0.0]]), GsoKind.DIAGONALIZABLE)
    with pytest.raises(InvalidParams):
        perturb(gso, PerturbationSpec.create(0.1))


def test_graph_distances():
    S1 = np.array([[0.0, 2.0], [2.0, 0.0]])
    S2 = np.array([[0.0, 0.5], [0.5, 0.0]])
    assert graph_distance(S1, S2) == 2
    assert graph_distance(S1, S2, GraphDistanceKind.L1) == pytest.approx(3.0)
    assert graph_distance(S1, S2, "EdgeWeightL2") == pytest.approx(4.5)


def test_filter_perturbation_bound_holds(er_graph, rng):
    for seed in range(10):
        s_bar, _ = perturb(er_graph, PerturbationSpec.rewire(0.1), seed=seed)
        lhs, rhs = filter_perturbation_bound(er_graph, s_bar, rng.standard_normal(4))
        assert lhs <= rhs + 1e-9
    lhs, rhs = filter_perturbation_bound(er_graph, er_graph, [1.0, 2.0])
    assert lhs == 0.0 and rhs == 0.0


def test_spec_validation():
    with pytest.raises(InvalidParams):
        PerturbationSpec(p_create=1.5)
    with pytest.raises(InvalidParams):
        PerturbationSpec.from_dict({"mode": "Create", "colour": "red"})
    with pytest.raises(ValueError):
        PerturbationSpec(mode="Teleport")
    spec = perturbation_from_config({"mode": "RatioRewire", "fraction": 0.1})
    assert spec.mode is PerturbationMode.RATIO_REWIRE
    assert perturbation_from_config(None) is None
