import numpy as np
import pytest

from rgsp.errors import NonConvergence
from rgsp.solvers import (
    SolverReport,
    fista,
    l21_norm,
    nuclear_norm,
    power_iteration,
    project_adjacency_set,
    project_symmetric_hollow_nonneg,
    prox_columns,
    prox_l1,
    prox_matrix,
    prox_pairwise_l1,
    prox_rows,
    prox_sum,
)


def test_soft_threshold():
    np.testing.assert_allclose(prox_l1(np.array([-3.0, -0.5, 0.2, 2.0]), 1.0), [-2.0, 0.0, 0.0, 1.0])
    np.testing.assert_allclose(prox_l1(np.array([1.0, 1.0]), np.array([0.5, 2.0])), [0.5, 0.0])


def test_singular_value_thresholding(rng):
    M = rng.standard_normal((5, 4))
    s = np.linalg.svd(M, compute_uv=False)
    shrunk = np.linalg.svd(prox_matrix(M, s[2]), compute_uv=False)
    np.testing.assert_allclose(shrunk[:2], s[:2] - s[2], atol=1e-10)
    np.testing.assert_allclose(shrunk[2:], 0.0, atol=1e-10)
    assert nuclear_norm(M) == pytest.approx(s.sum())


def test_column_group_shrinkage():
    V = np.array([[3.0, 0.1], [4.0, 0.1]])
    out = prox_columns(V, 1.0)
    np.testing.assert_allclose(out[:, 0], [2.4, 3.2])
    np.testing.assert_allclose(out[:, 1], 0.0)
    assert l21_norm(V) == pytest.approx(5.0 + np.sqrt(0.02))


def test_pairwise_prox_preserves_mean():
    a, b = np.array([2.0, 0.0]), np.array([0.0, 0.1])
    pa, pb = prox_pairwise_l1(a, b, 0.5)
    np.testing.assert_allclose(pa + pb, a + b)
    np.testing.assert_allclose(pa, [1.5, 0.05])
    np.testing.assert_allclose(pb, [0.5, 0.05])


def test_projection_onto_adjacency_set(rng):
    V = rng.standard_normal((6, 6)) * 0.1
    P = project_adjacency_set(V)
    np.testing.assert_array_equal(P, P.T)
    assert (P >= 0).all()
    np.testing.assert_array_equal(np.diag(P), 0.0)
    assert (P.sum(axis=1) >= 1.0 - 1e-8).all()
    feasible = np.ones((4, 4)) - np.eye(4)
    np.testing.assert_array_equal(project_adjacency_set(feasible), feasible)
    np.testing.assert_array_equal(project_symmetric_hollow_nonneg(np.eye(3)), np.zeros((3, 3)))


def test_prox_of_sum_is_optimal(rng):
    V = rng.standard_normal((6, 3))
    a, b = 0.4, 0.7

    def objective(X):
        return 0.5 * np.sum((X - V) ** 2) + a * l21_norm(X.T) + b * nuclear_norm(X)

    X = prox_sum(V, lambda x: prox_rows(x, a), lambda x: prox_matrix(x, b), max_iter=5000)
    best = objective(X)
    for _ in range(200):
        assert objective(X + 1e-2 * rng.standard_normal(X.shape)) >= best - 1e-9
    chained = prox_matrix(prox_rows(V, a), b)
    assert objective(chained) >= best - 1e-9
    np.testing.assert_allclose(prox_sum(V, lambda x: prox_rows(x, a), lambda x: x), prox_rows(V, a), atol=1e-10)


def test_adjacency_projection_is_nearest_point(rng):
    np.testing.assert_allclose(project_adjacency_set(np.zeros((4, 4))), (np.ones((4, 4)) - np.eye(4)) / 3, atol=1e-9)
    V = rng.standard_normal((6, 6)) * 0.3
    P = project_adjacency_set(V)
    for _ in range(50):
        R = project_symmetric_hollow_nonneg(rng.random((6, 6)))
        R = R / R.sum(axis=1).min() * (1.0 + rng.random())
        # variational inequality of the projection onto a convex set
        assert np.sum((V - P) * (R - P)) <= 1e-6


def test_power_iteration(rng):
    A = rng.standard_normal((8, 8))
    G = A.T @ A
    assert power_iteration(lambda x: G @ x, 8, n_iter=2000, tol=1e-12) == pytest.approx(
        np.linalg.eigvalsh(G).max(), rel=1e-4
    )


def test_fista_solves_lasso(rng):
    A = rng.standard_normal((30, 10))
    x_true = np.zeros(10)
    x_true[[1, 6]] = [2.0, -1.5]
    b = A @ x_true
    lam = 0.01
    report = SolverReport()
    x = fista(
        lambda x: 0.5 * np.sum((A @ x - b) ** 2),
        lambda x: A.T @ (A @ x - b),
        lambda x: lam * np.abs(x).sum(),
        lambda v, step: prox_l1(v, lam * step),
        np.zeros(10),
        tol=1e-10,
        report=report,
    )
    assert report.converged
    np.testing.assert_allclose(x, x_true, atol=1e-2)
    assert report.objective[-1] <= report.objective[0]
    frame = report.to_frame()
    assert list(frame.columns) == ["iter", "objective"]


def test_fista_iteration_cap(rng):
    A = rng.standard_normal((20, 10))
    b = rng.standard_normal(20)
    args = (
        lambda x: 0.5 * np.sum((A @ x - b) ** 2),
        lambda x: A.T @ (A @ x - b),
        lambda x: 0.0,
        lambda v, step: v,
        np.zeros(10),
    )
    with pytest.raises(NonConvergence):
        fista(*args, max_iter=2, tol=0.0)
    assert fista(*args, max_iter=2, tol=0.0, raise_on_cap=False).shape == (10,)


def test_report_frame_pads_ragged_traces():
    report = SolverReport(objective=[3.0, 2.0, 1.0])
    report.record("primal", 0.1)
    frame = report.to_frame()
    assert len(frame) == 3
    assert frame["primal"].isna().sum() == 2
