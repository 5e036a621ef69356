import numpy as np
import pytest

from rgsp.agss_sampling import (
    ObservationKind,
    ObservationMatrix,
    SeedEstimate,
    aggregation_bandlimited_recover,
    blind_deconvolution,
    blind_sparse_recovery,
    build_aggregation,
    check_indices,
    design_criterion,
    error_covariance,
    exhaustive_sampling_design,
    greedy_sampling_design,
    observation_phi,
    observation_phi_selection,
    observation_theta,
    observation_xi,
    recover_known_support,
    recovery_rate,
    run_recovery_scenario,
    seed_recovered,
    selection_matrix,
    selection_sampling_recover,
    space_shift_assemble,
)
from rgsp.errors import (
    FrequencyBlind,
    InvalidParams,
    InvalidSelection,
    NonConvergence,
    RankDeficient,
    SingularNoiseCov,
)
from rgsp.graph_core import build_gso, filter_from_coeffs, generate_signal, random_graph

H = [1.0, 0.6, 0.2]


@pytest.fixture
def path8():
    # distinct eigenvalues; node 0 has no zero eigenvector entry
    return build_gso([(i, i + 1) for i in range(7)])


def _sparse(n, support, values):
    s = np.zeros(n)
    s[support] = values
    return s


def test_selection_matrix_and_index_checks():
    np.testing.assert_array_equal(selection_matrix([2, 0], 3), [[0, 0, 1], [1, 0, 0]])
    with pytest.raises(InvalidSelection):
        check_indices([1, 1], 4)
    with pytest.raises(InvalidSelection):
        check_indices([4], 4)


def test_theta_matches_aggregation_oracle(rng):
    for seed in range(20):
        gso = random_graph("ER", {"n_nodes": 8, "p": 0.4}, seed=seed)
        node = seed % 8
        s = rng.standard_normal(8)
        state = build_aggregation(gso, s, node, range(8))
        z = observation_theta(gso, node).matrix @ s
        scale = np.abs(state.Z[node]).max()
        np.testing.assert_allclose(z, state.Z[node], atol=1e-7 * max(scale, 1.0))


def test_xi_matches_diffused_aggregation(sbm_graph, rng):
    s = _sparse(16, [2, 9], [1.0, -2.0])
    x = filter_from_coeffs(H, sbm_graph.matrix) @ s
    state = build_aggregation(sbm_graph, x, 3, [0, 1, 2, 3, 4])
    obs = observation_xi(sbm_graph, 3, H, n_shifts=5)
    assert obs.kind is ObservationKind.XI
    np.testing.assert_allclose(obs.matrix @ s, state.z_Q, atol=1e-8 * np.abs(state.z_Q).max())
    np.testing.assert_allclose(obs.diffusion @ s, x)


def test_lifted_phi_matches_diffused_aggregation(path8, rng):
    s = _sparse(8, [3], [1.5])
    x = filter_from_coeffs(H, path8.matrix) @ s
    lifted = np.outer(s, H).flatten(order="F")
    obs = observation_phi(path8, 0, len(H))
    np.testing.assert_allclose(obs.matrix @ lifted, build_aggregation(path8, x, 0, range(8)).Z[0], atol=1e-8)


def test_lifted_selection_map_reproduces_filtered_signal(path8):
    s = _sparse(8, [1, 6], [1.0, -0.5])
    x = filter_from_coeffs(H, path8.matrix) @ s
    obs = observation_phi_selection(path8, len(H))
    assert obs.matrix.shape == (8, 8 * len(H))
    np.testing.assert_allclose(obs.matrix @ np.outer(s, H).flatten(order="F"), x, atol=1e-8)


def test_known_support_recovery_is_exact_without_noise(path8):
    s = _sparse(8, [1, 4], [2.0, -1.0])
    obs = observation_xi(path8, 0, H)
    z = obs.matrix @ s
    estimate = recover_known_support(obs, z[:4], range(4), [1, 4])
    np.testing.assert_allclose(estimate.s_hat, s, atol=1e-9)
    np.testing.assert_allclose(estimate.x_hat, filter_from_coeffs(H, path8.matrix) @ s, atol=1e-9)
    assert not estimate.flags["rank_deficient"]
    with pytest.raises(InvalidParams):
        recover_known_support(obs, z[:1], [0], [1, 4])


@pytest.mark.slow
def test_blue_error_matches_error_covariance(path8, rng):
    support, sigma2 = [1, 4], 0.01
    s = _sparse(8, support, [2.0, -1.0])
    obs = observation_theta(path8, 0)
    cov = sigma2 * np.eye(8)
    rows = np.arange(8)
    clean = obs.matrix @ s
    errors = []
    for _ in range(4000):
        z = clean + np.sqrt(sigma2) * rng.standard_normal(8)
        errors.append(np.sum((recover_known_support(obs, z, rows, support, cov).s_hat - s) ** 2))
    predicted = np.trace(error_covariance(obs, support, rows, cov))
    assert np.mean(errors) == pytest.approx(predicted, rel=0.1)


def test_singular_noise_covariance(path8):
    obs = observation_theta(path8, 0)
    with pytest.raises(SingularNoiseCov):
        recover_known_support(obs, np.zeros(3), range(3), [1], noise_cov=np.zeros((8, 8)))


def test_sampling_designs(path8):
    obs = observation_xi(path8, 0, H)
    support = [2, 5]
    greedy = greedy_sampling_design(obs, support, None, 3)
    assert greedy.size == 3 and np.unique(greedy).size == 3
    best, best_val = exhaustive_sampling_design(obs, support, None, 3)
    assert best_val <= design_criterion(obs, support, greedy) * (1 + 1e-9)
    for criterion in ("SpectralNorm", "LogDet"):
        assert np.isfinite(design_criterion(obs, support, greedy, criterion=criterion))
    with pytest.raises(InvalidParams):
        design_criterion(obs, support, greedy, criterion="Entropy")
    with pytest.raises(InvalidParams):
        greedy_sampling_design(obs, support, None, 1)


def test_blind_recovery_noiseless(path8):
    s = _sparse(8, [5], [1.0])
    obs = observation_xi(path8, 0, H)
    z = obs.matrix @ s
    exact = blind_sparse_recovery(obs, z, range(8), exact=True)
    assert seed_recovered(s, exact)
    with pytest.raises(InvalidParams):
        blind_sparse_recovery(obs, z, range(8), gamma=0.0)


def test_lasso_recovery_on_incoherent_design(rng):
    A = np.hstack([np.eye(8), 0.1 * rng.standard_normal((8, 4))])
    obs = ObservationMatrix(ObservationKind.THETA, A, (0,))
    s = _sparse(12, [2], [1.5])
    estimate = blind_sparse_recovery(obs, A @ s, range(8), gamma=1e-3, debias=True)
    np.testing.assert_array_equal(estimate.support, [2])
    np.testing.assert_allclose(estimate.s_hat, s, atol=1e-10)


def test_blind_deconvolution_fixes_scale(path8):
    s = _sparse(8, [2], [3.0])
    obs = observation_phi(path8, 0, 2)
    z = obs.matrix @ np.outer(s, [1.0, 0.5]).flatten(order="F")
    estimate = blind_deconvolution(obs, z, range(8), gamma1=1e-4, gamma2=1e-4, raise_on_cap=False)
    assert estimate.scaling_note
    assert estimate.h_hat.shape == (2,)
    assert np.linalg.norm(estimate.h_hat) == pytest.approx(1.0)
    assert estimate.h_hat[np.flatnonzero(np.abs(estimate.h_hat) > 1e-12)[0]] > 0
    assert "underdetermined" in estimate.flags
    with pytest.raises(InvalidParams):
        blind_deconvolution(observation_theta(path8, 0), z, range(8))


def test_blind_deconvolution_iteration_cap(path8):
    s = _sparse(8, [2], [3.0])
    obs = observation_phi(path8, 0, 2)
    z = obs.matrix @ np.outer(s, [1.0, 0.5]).flatten(order="F")
    with pytest.raises(NonConvergence):
        blind_deconvolution(obs, z, range(8), gamma1=1e-4, gamma2=1e-4, max_iter=2)
    estimate = blind_deconvolution(obs, z, range(8), gamma1=1e-4, gamma2=1e-4, max_iter=2, raise_on_cap=False)
    assert estimate.flags["converged"] is False


@pytest.mark.parametrize("node", [-1, 8])
def test_node_index_out_of_range(path8, node):
    z = np.zeros(3)
    with pytest.raises(InvalidSelection):
        aggregation_bandlimited_recover(path8, z, node, [0, 1, 2], 3)
    with pytest.raises(InvalidSelection):
        observation_phi(path8, node, 2)
    with pytest.raises(InvalidSelection):
        build_aggregation(path8, np.zeros(8), node, [0])


def test_space_shift_stacks_nodes(path8):
    s = _sparse(8, [3], [1.0])
    stacked, rows = space_shift_assemble(path8, H, [0, 7], [[0, 1], [0, 2]])
    np.testing.assert_array_equal(rows, [0, 1, 8, 10])
    x = filter_from_coeffs(H, path8.matrix) @ s
    expected = np.concatenate(
        [build_aggregation(path8, x, 0, [0, 1]).z_Q, build_aggregation(path8, x, 7, [0, 2]).z_Q]
    )
    np.testing.assert_allclose(stacked.matrix[rows] @ s, expected, atol=1e-9)


def test_bandlimited_reconstructions(path8):
    x = generate_signal(path8, "Bandlimited", {"bandwidth": 3}, seed=0).X[:, 0]
    np.testing.assert_allclose(selection_sampling_recover(path8, x[[0, 3, 6]], [0, 3, 6], 3), x, atol=1e-9)
    with pytest.raises(RankDeficient):
        selection_sampling_recover(path8, x[[0, 3]], [0, 3], 3)
    z = build_aggregation(path8, x, 0, [0, 1, 2]).z_Q
    np.testing.assert_allclose(aggregation_bandlimited_recover(path8, z, 0, [0, 1, 2], 3), x, atol=1e-8)
    with pytest.raises(FrequencyBlind):
        aggregation_bandlimited_recover(path8, z, 2, [0, 1, 2], 3)


def test_recovery_accounting():
    s = _sparse(4, [1], [1.0])
    assert seed_recovered(s, SeedEstimate(s_hat=s + 0.01 * np.eye(4)[1], support=np.array([1])))
    assert not seed_recovered(s, np.array([0.0, 1.0, 0.5, 0.0]))
    assert recovery_rate([True, False, True, True]) == 0.75
    assert recovery_rate([1, 2, 3], lambda t: t > 1) == pytest.approx(2 / 3)
    with pytest.raises(InvalidParams):
        recovery_rate([])


@pytest.mark.parametrize("scenario", ["sparse-recovery", "active-sampling", "diffused", "blind-diffused"])
def test_named_scenarios_recover_noiseless_seed(path8, scenario):
    seeds = _sparse(8, [4], [2.0])
    estimate = run_recovery_scenario(scenario, path8, seeds, H, node_i=0, n_samples=8, seed=0)
    assert seed_recovered(seeds, estimate)
    with pytest.raises(InvalidParams):
        run_recovery_scenario("psychic", path8, seeds, H, 0, 4)


@pytest.mark.slow
def test_blind_recovery_degrades_with_sparsity():
    rates = {}
    for sparsity in (1, 6):
        outcomes = []
        for trial in range(30):
            rng = np.random.default_rng(trial)
            gso = random_graph("ER", {"n_nodes": 12, "p": 0.4}, seed=trial)
            seeds = _sparse(12, rng.choice(12, sparsity, replace=False), rng.standard_normal(sparsity))
            estimate = run_recovery_scenario("blind-diffused", gso, seeds, H, 0, 8, seed=trial)
            outcomes.append(seed_recovered(seeds, estimate))
        rates[sparsity] = recovery_rate(outcomes)
    assert rates[1] >= 0.5
    assert rates[6] < rates[1]
