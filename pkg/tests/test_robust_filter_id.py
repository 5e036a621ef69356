import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from rgsp.errors import DimensionMismatch, Divergence, InvalidParams, NonConvergence
from rgsp.graph_core import Gso, build_gso, filter_from_coeffs, nerr, random_graph
from rgsp.perturbation import PerturbationSpec, perturb
from rgsp.robust_filter_id import (
    CdStats,
    ReweightState,
    RfiProblem,
    ar_forecast,
    ar_predict,
    ar_rfi_solve,
    check_identifiability,
    commutator,
    commutator_operator,
    extract_coeffs,
    joint_rfi_solve,
    pair_minimizer,
    rfi_solve,
    rfi_solve_stationary,
    rfi_step1_closed_form,
    rfi_step1_gradient,
    rfi_step1_kron,
    rfi_step2_cd,
    rfi_step2_exact,
    stationarity_residual,
    step2_objective,
)

COEFFS = np.array([1.0, 0.5, 0.2])


def _instance(n=10, m=30, seed=0, rewire=0.0):
    rng = np.random.default_rng(seed)
    gso = random_graph("ER", {"n_nodes": n, "p": 0.3}, seed=seed)
    H = filter_from_coeffs(COEFFS, gso.matrix)
    X = rng.standard_normal((n, m))
    s_bar = perturb(gso, PerturbationSpec.rewire(rewire), seed=seed)[0] if rewire else gso
    return gso.matrix, H, X, H @ X, np.array(s_bar.matrix)


def _stacked_lstsq(S, X, Y, gamma, extra=()):
    n = S.shape[0]
    eye = np.eye(n)
    blocks = [np.kron(X.T, eye), np.sqrt(gamma) * (np.kron(eye, S) - np.kron(S.T, eye))]
    rhs = [Y.flatten(order="F"), np.zeros(n * n)]
    for w, M in extra:
        blocks.append(np.sqrt(w) * (np.kron(eye, M) - np.kron(M.T, eye)))
        rhs.append(np.zeros(n * n))
    sol = np.linalg.lstsq(np.vstack(blocks), np.concatenate(rhs), rcond=None)[0]
    return sol.reshape((n, n), order="F")


def test_pair_minimizer_matches_scalar_search(rng):
    for _ in range(2000):
        a = rng.uniform(0.1, 5.0)
        c = rng.uniform(-5.0, 5.0)
        w1, w2 = rng.uniform(0.0, 2.0, size=2)
        s_bar = rng.uniform(0.0, 2.0) if rng.random() < 0.7 else 0.0

        def f(s):
            return a * s * s + c * s + w1 * abs(s - s_bar) + w2 * s

        upper = 10.0 + abs(c) / a + s_bar
        ref = minimize_scalar(f, bounds=(0.0, upper), method="bounded", options={"xatol": 1e-12}).x
        s = pair_minimizer(a, c, w1, w2, s_bar)
        assert s >= 0.0
        assert f(s) <= f(ref) + 1e-9
        assert s == pytest.approx(ref, abs=1e-6)


def test_pair_minimizer_without_curvature():
    assert pair_minimizer(0.0, 0.0, 2.0, 1.0, 0.7) == 0.7
    assert pair_minimizer(0.0, 0.0, 1.0, 2.0, 0.7) == 0.0


def test_commutator_operator_vectorization(rng):
    S, H = rng.standard_normal((2, 5, 5))
    np.testing.assert_allclose(
        commutator_operator(H) @ S.flatten(order="F"), commutator(S, H).flatten(order="F"), atol=1e-12
    )


@pytest.mark.parametrize("seed", range(5))
def test_closed_form_matches_stacked_least_squares(seed):
    S, _, X, Y, _ = _instance(n=7, m=12, seed=seed)
    Y = Y + 0.1 * np.random.default_rng(seed).standard_normal(Y.shape)
    expected = _stacked_lstsq(S, X, Y, 3.0)
    scale = np.linalg.norm(expected)
    assert np.linalg.norm(rfi_step1_closed_form(S, X, Y, 3.0) - expected) <= 1e-8 * scale
    assert np.linalg.norm(rfi_step1_kron(S, X, Y, 3.0) - expected) <= 1e-8 * scale


def test_closed_form_with_extra_terms_and_directed_shift(rng):
    S, _, X, Y, _ = _instance(n=6, m=10, seed=7)
    C = X @ X.T / X.shape[1]
    extra = [(0.5, C)]
    expected = _stacked_lstsq(S, X, Y, 2.0, extra)
    np.testing.assert_allclose(rfi_step1_closed_form(S, X, Y, 2.0, extra_terms=extra), expected, atol=1e-8)
    directed = np.triu(rng.uniform(size=(6, 6)), 1)
    expected = _stacked_lstsq(directed, X, Y, 2.0)
    np.testing.assert_allclose(rfi_step1_closed_form(directed, X, Y, 2.0), expected, atol=1e-8)


def test_gradient_step1_approaches_closed_form():
    S, _, X, Y, _ = _instance(n=6, m=30, seed=2)
    exact = rfi_step1_closed_form(S, X, Y, 1.0)
    approx = rfi_step1_gradient(S, X, Y, 1.0, n_iter=3000)
    assert np.linalg.norm(approx - exact) <= 1e-6 * np.linalg.norm(exact)


def test_gradient_step1_divergence():
    S, _, X, Y, _ = _instance(n=6, m=30, seed=2)
    with pytest.raises(Divergence):
        rfi_step1_gradient(S, X, Y, 1.0, mu=10.0, n_iter=20, max_restarts=0)
    with pytest.raises(InvalidParams):
        rfi_step1_gradient(S, X, Y, 1.0, mu=-1.0)


def _step2_setup(seed=3):
    S, H, _, _, s_bar = _instance(n=8, seed=seed, rewire=0.3)
    weights = ReweightState.from_iterate(s_bar, s_bar, 1.0, 1.0)
    return [(10.0, H)], s_bar, weights


def test_coordinate_descent_is_monotone_and_feasible():
    terms, s_bar, weights = _step2_setup()
    lam, beta = 0.01, 0.01
    S = s_bar.copy()
    values = [step2_objective(terms, S, s_bar, lam, beta, weights)]
    stats = CdStats()
    for _ in range(10):
        S = rfi_step2_cd(terms, s_bar, S, lam, beta, weights, n_sweeps=1, stats=stats)
        values.append(step2_objective(terms, S, s_bar, lam, beta, weights))
    assert np.all(np.diff(values) <= 1e-9 * values[0])
    assert values[-1] < values[0]
    np.testing.assert_array_equal(S, S.T)
    assert (S >= 0).all()
    np.testing.assert_array_equal(np.diag(S), 0.0)
    n = S.shape[0]
    assert stats.entries_touched[-1] == (n * (n - 1) // 2) * (4 * n - 4)


def test_exact_step2_converges_and_reports_cap():
    terms, s_bar, weights = _step2_setup()
    S = rfi_step2_exact(terms, s_bar, weights, 0.01, 0.01)
    again = rfi_step2_cd(terms, s_bar, S, 0.01, 0.01, weights, n_sweeps=1)
    np.testing.assert_allclose(again, S, atol=1e-8)
    with pytest.raises(NonConvergence):
        rfi_step2_exact(terms, s_bar, weights, 0.01, 0.01, tol=0.0, max_sweeps=1)


def test_exact_graph_and_data_are_a_fixed_point():
    S, H, X, Y, _ = _instance(seed=4)
    problem = RfiProblem(X=X, Y=Y, S_bar=S)
    solution = rfi_solve(problem, t_max=3)
    assert nerr(solution.H, H) < 1e-8
    np.testing.assert_allclose(solution.S.matrix, S, atol=1e-8)
    np.testing.assert_allclose(solution.coeffs[:3], COEFFS, atol=1e-6)
    residual = stationarity_residual(problem, H, S)
    assert residual["H"] < 1e-10
    assert residual["S"] == 0.0


def test_majorized_objective_never_increases():
    for seed in range(3):
        S, H, X, Y, s_bar = _instance(seed=seed, rewire=0.2)
        Y = Y + 0.05 * np.random.default_rng(seed).standard_normal(Y.shape)
        problem = RfiProblem(X=X, Y=Y, S_bar=s_bar, lam=1.0, beta=0.1, gamma=10.0)
        solution = rfi_solve(problem, algorithm="Alg2", t_max=6, truth=(H, S))
        objective = np.asarray(solution.report.objective)
        assert np.all(np.diff(objective) <= 1e-8 * np.abs(objective).max())
        trace = solution.report.residuals
        slack = 1e-8 * max(trace["surrogate_before"])
        for before, step1, step2 in zip(trace["surrogate_before"], trace["surrogate_step1"], trace["surrogate_step2"]):
            assert step1 <= before + slack
            assert step2 <= step1 + slack
        assert len(trace["nerr_H"]) == solution.report.iterations
        S_hat = solution.S.matrix
        np.testing.assert_array_equal(S_hat, S_hat.T)
        assert (S_hat >= 0).all()


def test_fast_variant_runs_and_stays_feasible():
    S, H, X, Y, s_bar = _instance(seed=5, rewire=0.2)
    problem = RfiProblem(X=X, Y=Y, S_bar=s_bar)
    solution = rfi_solve(problem, algorithm="Alg3", t_max=3, tau1=20, tau2=5)
    assert np.isfinite(solution.report.objective).all()
    assert (solution.S.matrix >= 0).all()
    with pytest.raises(InvalidParams):
        rfi_solve(problem, algorithm="Alg9")


def test_joint_with_one_dataset_equals_single():
    S, H, X, Y, s_bar = _instance(seed=6, rewire=0.2)
    problem = RfiProblem(X=X, Y=Y, S_bar=s_bar)
    single = rfi_solve(problem, t_max=3)
    joint = joint_rfi_solve([(X, Y)], problem, t_max=3)
    np.testing.assert_allclose(joint.filters[0], single.H)
    np.testing.assert_allclose(joint.S.matrix, single.S.matrix)


def test_joint_threads_match_serial():
    S, H, X, Y, s_bar = _instance(seed=8, rewire=0.2)
    H2 = filter_from_coeffs([0.3, -0.4, 0.1], S)
    X2 = np.random.default_rng(1).standard_normal(X.shape)
    datasets = [(X, Y), (X2, H2 @ X2)]
    problem = RfiProblem(X=X, Y=Y, S_bar=s_bar)
    serial = joint_rfi_solve(datasets, problem, t_max=2)
    threaded = joint_rfi_solve(datasets, problem, t_max=2, jobs=2)
    for a, b in zip(serial.filters, threaded.filters):
        np.testing.assert_array_equal(a, b)
    assert len(serial.coeffs) == 2
    with pytest.raises(InvalidParams):
        joint_rfi_solve(datasets, problem, alphas=[1.0])
    with pytest.raises(DimensionMismatch):
        joint_rfi_solve([(X[:3], Y[:3])], problem)


def test_stationary_variant_without_penalties_equals_plain():
    S, H, X, Y, s_bar = _instance(seed=9, rewire=0.2)
    plain = rfi_solve(RfiProblem(X=X, Y=Y, S_bar=s_bar), t_max=2)
    stationary_problem = RfiProblem(X=X, Y=Y, S_bar=s_bar, mu_x=0.0, mu_y=0.0)
    stationary = rfi_solve_stationary(stationary_problem, t_max=2)
    np.testing.assert_allclose(stationary.H, plain.H)
    np.testing.assert_allclose(stationary.S.matrix, plain.S.matrix)
    np.testing.assert_allclose(stationary_problem.cov_x, X @ X.T / X.shape[1])


def test_stationary_penalties_enter_the_graph_step():
    S, H, X, Y, s_bar = _instance(seed=9, rewire=0.2)
    problem = RfiProblem(X=X, Y=Y, S_bar=s_bar, mu_x=5.0, mu_y=5.0)
    assert len(problem.stationarity_terms()) == 0
    solution = rfi_solve_stationary(problem, t_max=2)
    assert len(problem.stationarity_terms()) == 2
    assert np.isfinite(solution.report.objective).all()


def test_gamma_schedule():
    S, _, X, Y, _ = _instance(seed=1)
    problem = RfiProblem(X=X, Y=Y, S_bar=S, gamma=1.0, gamma_growth=2.0, gamma_max=5.0)
    assert [problem.gamma_at(t) for t in range(5)] == [1.0, 2.0, 4.0, 5.0, 5.0]


def test_problem_validation():
    S, _, X, Y, _ = _instance(seed=1)
    with pytest.raises(InvalidParams):
        RfiProblem(X=X, Y=Y, S_bar=S, lam=-1.0)
    with pytest.raises(InvalidParams):
        RfiProblem(X=X, Y=Y, S_bar=S, delta1=0.0)
    with pytest.raises(DimensionMismatch):
        RfiProblem(X=X[:, :5], Y=Y, S_bar=S)
    assert RfiProblem(X=X, Y=Y, S_bar=Gso(S)).n_nodes == S.shape[0]


def test_extract_coeffs():
    path = build_gso([(i, i + 1) for i in range(7)])
    fit = extract_coeffs(filter_from_coeffs(COEFFS, path.matrix), path, 3)
    np.testing.assert_allclose(fit.coeffs, COEFFS, atol=1e-10)
    assert fit.residual < 1e-10
    with pytest.raises(InvalidParams):
        extract_coeffs(np.eye(8), path, 9)


def test_identifiability(rng):
    path = build_gso([(i, i + 1) for i in range(7)])
    assert check_identifiability(path, rng.standard_normal((8, 8))).identifiable
    complete = Gso(np.ones((5, 5)) - np.eye(5))
    report = check_identifiability(complete, rng.standard_normal((5, 5)))
    assert not report.identifiable
    assert report.min_eigen_gap < 1e-9
    assert not check_identifiability(path, np.zeros((8, 3))).identifiable


def test_identifiability_of_a_directed_cycle(rng):
    # eigenvalues are the 4th roots of unity
    cycle = np.roll(np.eye(4), 1, axis=1)
    report = check_identifiability(cycle, rng.standard_normal((4, 4)))
    assert report.min_eigen_gap == pytest.approx(np.sqrt(2.0))
    assert report.identifiable


def test_autoregressive_identification_and_prediction(rng):
    path = build_gso([(i, i + 1) for i in range(7)])
    S = np.array(path.matrix)
    H1 = filter_from_coeffs([0.2, 0.1], S)
    T = 40
    X_seq = [rng.standard_normal(8) for _ in range(T)]
    Y_seq = [X_seq[0]]
    for k in range(1, T):
        Y_seq.append(H1 @ Y_seq[-1] + X_seq[k])
    problem = RfiProblem(X=np.zeros((8, 1)), Y=np.zeros((8, 1)), S_bar=S, order=2)
    solution = ar_rfi_solve(Y_seq, problem, memory=1, X_seq=X_seq, t_max=2, truth=([H1], S))
    assert nerr(solution.filters[0], H1) < 1e-8
    np.testing.assert_allclose(solution.coeffs[0], [0.2, 0.1], atol=1e-6)
    np.testing.assert_allclose(ar_predict([H1], Y_seq[:-1], X_seq[-1]), Y_seq[-1])
    forecast = ar_forecast([H1], Y_seq[:5], steps=3, X_future=X_seq[5:8])
    np.testing.assert_allclose(forecast[-1], Y_seq[7])
    with pytest.raises(InvalidParams):
        ar_rfi_solve(Y_seq[:1], problem, memory=1)
    with pytest.raises(InvalidParams):
        ar_predict([H1, H1], Y_seq[:1])
