import numpy as np
import pytest

from rgsp.errors import (
    DimensionMismatch,
    InvalidParams,
    InvalidStructure,
    NonDiagonalizable,
    RankDeficientWarning,
    ZeroReference,
)
from rgsp.graph_core import (
    GraphFilter,
    Gso,
    GsoKind,
    SignalSet,
    add_noise,
    apply_filter,
    build_gso,
    denoise_bandlimited,
    denoise_quadratic,
    filter_from_coeffs,
    generate_signal,
    gft,
    identify_filter_ls,
    identify_filter_ls_vertex,
    igft,
    laplacian,
    neighborhood_median,
    nerr,
    random_graph,
    sample_covariance,
)


def test_filters_commute_with_shift(rng):
    for seed in range(50):
        gso = random_graph("ER", {"n_nodes": 10, "p": 0.3}, seed=seed)
        S = gso.matrix
        H = filter_from_coeffs(rng.standard_normal(4), S)
        scale = max(np.linalg.norm(H) * np.linalg.norm(S), 1.0)
        assert np.linalg.norm(H @ S - S @ H) <= 1e-10 * scale


def test_vertex_and_frequency_filtering_agree(er_graph, rng):
    h = rng.standard_normal(4)
    x = rng.standard_normal(er_graph.n_nodes)
    graph_filter = GraphFilter(h, er_graph)
    V = er_graph.eigenvectors
    spectral = V @ (graph_filter.frequency_response() * (V.T @ x))
    np.testing.assert_allclose(apply_filter(graph_filter, x), spectral, atol=1e-8)


def test_symmetric_spectrum_sorted_and_reconstructs(sbm_graph):
    lam = sbm_graph.eigenvalues
    V = sbm_graph.eigenvectors
    assert np.all(np.diff(lam) <= 1e-12)
    np.testing.assert_allclose((V * lam) @ V.T, sbm_graph.matrix, atol=1e-10)
    np.testing.assert_allclose(sbm_graph.inverse_eigenvectors, V.T)


def test_gft_roundtrip_and_immutability(er_graph, rng):
    x = rng.standard_normal(er_graph.n_nodes)
    np.testing.assert_allclose(igft(er_graph, gft(er_graph, x)), x, atol=1e-10)
    assert not er_graph.matrix.flags.writeable
    with pytest.raises(ValueError):
        er_graph.matrix[0, 0] = 1.0


def test_kind_validation():
    with pytest.raises(InvalidStructure):
        Gso(np.array([[0.0, 1.0], [0.0, 0.0]]), GsoKind.ADJACENCY)
    with pytest.raises(InvalidStructure):
        Gso(np.array([[0.0, -1.0], [-1.0, 0.0]]), GsoKind.ADJACENCY)
    with pytest.raises(InvalidStructure):
        Gso(np.array([[1.0, -1.0], [-1.0, 2.0]]), GsoKind.LAPLACIAN)
    with pytest.raises(DimensionMismatch):
        Gso(np.zeros((2, 3)))
    L = laplacian(np.array([[0.0, 2.0], [2.0, 0.0]]))
    assert Gso(L, GsoKind.LAPLACIAN).eigenvalues[0] == pytest.approx(4.0)


def test_build_gso_rejects_bad_edges():
    with pytest.raises(InvalidStructure):
        build_gso([(0, 1), (1, 0)])
    with pytest.raises(InvalidStructure):
        build_gso([(0, 0)])
    with pytest.raises(DimensionMismatch):
        build_gso([(0, 1)], weights=[1.0, 2.0])
    with pytest.raises(InvalidStructure):
        Gso(np.ones((3, 3)) - np.eye(3), edge_list=[(0, 1)])


def test_jordan_block_is_not_diagonalizable():
    gso = Gso(np.array([[0.0, 1.0], [0.0, 0.0]]), GsoKind.DIAGONALIZABLE)
    with pytest.raises(NonDiagonalizable):
        gso.eigenvalues


def test_random_graph_models():
    sbm = random_graph("SBM", {"n_nodes": 10, "n_communities": 3, "p_in": 0.5, "p_out": 0.1}, seed=1)
    assert sbm.n_nodes == 10
    np.testing.assert_array_equal(np.bincount(sbm.node_labels), [4, 3, 3])
    regular = random_graph("Regular", {"n_nodes": 8, "degree": 3}, seed=1)
    np.testing.assert_array_equal(regular.matrix.sum(axis=1), 3.0)
    cave = random_graph("Caveman", {"n_cliques": 3, "clique_size": 4})
    assert cave.n_nodes == 12
    for model, params in [
        ("SW", {"n_nodes": 12, "k": 4, "beta": 0.2}),
        ("PLC", {"n_nodes": 12, "m": 2, "p": 0.3}),
    ]:
        S = random_graph(model, params, seed=0).matrix
        np.testing.assert_array_equal(S, S.T)
    with pytest.raises(InvalidParams):
        random_graph("Lattice", {"n_nodes": 4})
    with pytest.raises(InvalidParams):
        random_graph("ER", {"n_nodes": 4, "p": 1.5})
    with pytest.raises(InvalidParams):
        random_graph("ER", {"n_nodes": 4})


def test_random_graph_is_seeded():
    a = random_graph("ER", {"n_nodes": 15, "p": 0.3}, seed=11)
    b = random_graph("ER", {"n_nodes": 15, "p": 0.3}, seed=11)
    np.testing.assert_array_equal(a.matrix, b.matrix)


def test_bandlimited_signal_has_no_energy_outside_band(sbm_graph):
    signals = generate_signal(sbm_graph, "Bandlimited", {"bandwidth": 3, "n_signals": 4}, seed=2)
    assert isinstance(signals, SignalSet)
    assert signals.X.shape == (16, 4)
    np.testing.assert_allclose(gft(sbm_graph, signals.X)[3:], 0.0, atol=1e-10)
    np.testing.assert_allclose(denoise_bandlimited(sbm_graph, signals.X, 3), signals.X, atol=1e-10)


def test_dsgs_signal_is_diffused_sparse_seed(er_graph):
    signals = generate_signal(er_graph, "DSGS", {"sparsity": 2, "coeffs": [1.0, 0.5, 0.25]}, seed=4)
    seeds = signals.metadata["seeds"]
    assert np.count_nonzero(seeds) == 2
    np.testing.assert_allclose(signals.X, filter_from_coeffs([1.0, 0.5, 0.25], er_graph.matrix) @ seeds)


def test_other_signal_models(sbm_graph):
    piecewise = generate_signal(sbm_graph, "PiecewiseConstant", seed=0).X[:, 0]
    np.testing.assert_array_equal(piecewise, sbm_graph.node_labels + 1.0)
    mrf = generate_signal(sbm_graph, "Mrf", {"phi": 0.3}, seed=0)
    assert np.all(np.linalg.eigvalsh(mrf.metadata["covariance"]) > 0)
    smooth = generate_signal(sbm_graph, "Smooth", {"alpha": 2.0, "n_signals": 3}, seed=0)
    assert smooth.n_signals == 3
    with pytest.raises(InvalidParams):
        generate_signal(sbm_graph, "Bandlimited", {"bandwidth": 0})
    with pytest.raises(InvalidParams):
        generate_signal(sbm_graph, "StationaryWhite")
    with pytest.raises(InvalidParams):
        generate_signal(sbm_graph, "Chirp")


def test_add_noise_has_requested_power(rng):
    X = rng.standard_normal((20, 3))
    noisy = add_noise(X, 0.1, seed=1)
    ratios = np.linalg.norm(noisy - X, axis=0) ** 2 / np.linalg.norm(X, axis=0) ** 2
    np.testing.assert_allclose(ratios, 0.1)
    np.testing.assert_array_equal(add_noise(X, 0.0, seed=1), X)
    with pytest.raises(InvalidParams):
        add_noise(X, -1.0)


def test_neighborhood_median_on_path(path_graph):
    x = np.array([0.0, 10.0, 1.0, 2.0, 30.0, 3.0])
    np.testing.assert_allclose(neighborhood_median(path_graph, x), [5.0, 1.0, 2.0, 2.0, 3.0, 16.5])


def test_sample_covariance(rng):
    X = rng.standard_normal((4, 50))
    np.testing.assert_allclose(sample_covariance(X), X @ X.T / 50)


def test_noiseless_identification_is_exact(rng):
    for seed in range(20):
        gso = random_graph("ER", {"n_nodes": 14, "p": 0.4}, seed=seed)
        h = rng.standard_normal(3)
        X = rng.standard_normal((14, 14))
        Y = filter_from_coeffs(h, gso.matrix) @ X
        assert nerr(identify_filter_ls(gso, X, Y, 3).coeffs, h) < 1e-8
        assert nerr(identify_filter_ls_vertex(gso, X, Y, 3).coeffs, h) < 1e-8


def test_identification_flags_rank_deficiency(rng):
    complete = Gso(np.ones((6, 6)) - np.eye(6))
    X = rng.standard_normal((6, 6))
    Y = filter_from_coeffs([1.0, 0.5], complete.matrix) @ X
    with pytest.warns(RankDeficientWarning):
        fit = identify_filter_ls(complete, X, Y, 4)
    assert fit.rank_deficient
    assert fit.rank < 4


def test_quadratic_denoiser(path_graph, rng):
    x = rng.standard_normal(6)
    np.testing.assert_array_equal(denoise_quadratic(path_graph, x, 0.0), x)
    smoothed = denoise_quadratic(path_graph, x, 5.0)
    L = laplacian(path_graph.matrix)
    assert smoothed @ L @ smoothed < x @ L @ x
    with pytest.raises(InvalidParams):
        denoise_quadratic(path_graph, x, 1.0, regularizer="FilterSmoothness")


def test_nerr():
    assert nerr(np.array([1.0, 1.0]), np.array([1.0, 0.0])) == pytest.approx(1.0)
    with pytest.raises(ZeroReference):
        nerr(np.ones(3), np.zeros(3))
    with pytest.raises(DimensionMismatch):
        nerr(np.ones(3), np.ones(4))
