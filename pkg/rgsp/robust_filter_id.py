"""
Robust graph filter identification with graph denoising.

Given input/output pairs (X, Y) of an unknown graph filter H and only an
erroneous shift operator S_bar, jointly estimate H and a denoised S by
alternating two convex subproblems of the reweighted objective

    alpha ||Y - H X||^2 + lam sum Omega_bar |S - S_bar| + beta sum Omega |S|
        + gamma ||S H - H S||^2

Step 1 solves for H with S fixed (closed form or gradient steps), Step 2 for S
with H fixed (cyclic coordinate descent over tied symmetric pairs), and the
weights Omega, Omega_bar are refreshed from the current S after each pass.
The same engine handles K filters sharing one graph, stationarity penalties
and autoregressive filter sequences.
"""

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .errors import (
    Divergence,
    DimensionMismatch,
    IllConditionedWarning,
    InvalidParams,
    NonConvergence,
    SingularSystemWarning,
)
from .graph_core import Gso, GsoKind, nerr
from .solvers import SolverReport, Stopwatch, power_iteration

logger = logging.getLogger(__name__)

DENSE_STEP1_MAX_N = 40

# a commutator penalty w * ||S M - M S||_F^2
CommutatorTerm = Tuple[float, np.ndarray]


@dataclass
class RfiProblem:
    X: np.ndarray
    Y: np.ndarray
    S_bar: np.ndarray
    lam: float = 1.0
    beta: float = 0.1
    gamma: float = 10.0
    delta1: float = 1e-3
    delta2: float = 1e-3
    order: int = 4
    cov_x: Optional[np.ndarray] = None
    cov_y: Optional[np.ndarray] = None
    mu_x: float = 0.0
    mu_y: float = 0.0
    mu_h: float = 0.0
    gamma_growth: Optional[float] = None
    gamma_max: Optional[float] = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.Y = np.asarray(self.Y, dtype=float)
        if isinstance(self.S_bar, Gso):
            self.S_bar = np.asarray(self.S_bar.matrix)
        self.S_bar = np.asarray(self.S_bar, dtype=float)
        n = self.S_bar.shape[0]
        if self.X.shape != self.Y.shape or self.X.shape[0] != n:
            raise DimensionMismatch(f"X {self.X.shape}, Y {self.Y.shape}, S_bar {self.S_bar.shape}")
        for name in ("lam", "beta", "gamma", "mu_x", "mu_y", "mu_h"):
            if getattr(self, name) < 0:
                raise InvalidParams(f"{name} must be >= 0")
        if self.delta1 <= 0 or self.delta2 <= 0:
            raise InvalidParams("delta1 and delta2 must be > 0")

    @property
    def n_nodes(self) -> int:
        return self.S_bar.shape[0]

    def gamma_at(self, t: int) -> float:
        if self.gamma_growth is None:
            return self.gamma
        ramp = self.gamma * self.gamma_growth**t
        return min(ramp, self.gamma_max) if self.gamma_max is not None else ramp

    def stationarity_terms(self) -> List[CommutatorTerm]:
        terms = []
        if self.mu_x > 0 and self.cov_x is not None:
            terms.append((self.mu_x, np.asarray(self.cov_x, dtype=float)))
        if self.mu_y > 0 and self.cov_y is not None:
            terms.append((self.mu_y, np.asarray(self.cov_y, dtype=float)))
        return terms

    def filter_terms(self) -> List[CommutatorTerm]:
        """Optional commutativity penalties on H against the sample covariances."""
        if self.mu_h <= 0:
            return []
        return [(self.mu_h, np.asarray(c, dtype=float)) for c in (self.cov_x, self.cov_y) if c is not None]


@dataclass
class ReweightState:
    omega: np.ndarray
    omega_bar: np.ndarray

    @classmethod
    def from_iterate(cls, S: np.ndarray, S_bar: np.ndarray, delta1: float, delta2: float) -> "ReweightState":
        return cls(omega=1.0 / (np.abs(S) + delta2), omega_bar=1.0 / (np.abs(S - S_bar) + delta1))


@dataclass
class RfiSolution:
    H: np.ndarray
    S: Gso
    coeffs: np.ndarray
    report: SolverReport
    weights: ReweightState
    coeff_residual: float = 0.0


@dataclass
class JointRfiSolution:
    filters: List[np.ndarray]
    S: Gso
    coeffs: List[np.ndarray]
    report: SolverReport
    weights: ReweightState


# ---------------------------------------------------------------------------
# objective pieces
# ---------------------------------------------------------------------------


def commutator(S: np.ndarray, M: np.ndarray) -> np.ndarray:
    return S @ M - M @ S


def commutator_operator(H: np.ndarray) -> np.ndarray:
    """Sigma = H^T (+) (-H), so vec(S H - H S) = Sigma vec(S) in column-major order."""
    n = H.shape[0]
    eye = np.eye(n)
    return np.kron(H.T, eye) - np.kron(eye, H)


def data_misfit(H: np.ndarray, X: np.ndarray, Y: np.ndarray) -> float:
    return float(np.sum((Y - H @ X) ** 2))


def surrogate_objective(
    filters: Sequence[np.ndarray],
    data: Sequence[Tuple[np.ndarray, np.ndarray, float]],
    S: np.ndarray,
    S_bar: np.ndarray,
    lam: float,
    beta: float,
    gamma: float,
    weights: ReweightState,
    extra_terms: Sequence[CommutatorTerm] = (),
) -> float:
    """Objective with the logarithmic penalties linearized at the weights' iterate."""
    value = sum(alpha * data_misfit(H, X, Y) for H, (X, Y, alpha) in zip(filters, data))
    value += sum(gamma * np.sum(commutator(S, H) ** 2) for H in filters)
    value += sum(w * np.sum(commutator(S, M) ** 2) for w, M in extra_terms)
    value += lam * np.sum(weights.omega_bar * np.abs(S - S_bar)) + beta * np.sum(weights.omega * np.abs(S))
    return float(value)


def log_objective(
    filters: Sequence[np.ndarray],
    data: Sequence[Tuple[np.ndarray, np.ndarray, float]],
    S: np.ndarray,
    S_bar: np.ndarray,
    lam: float,
    beta: float,
    gamma: float,
    delta1: float,
    delta2: float,
    extra_terms: Sequence[CommutatorTerm] = (),
) -> float:
    """The non-convex objective with logarithmic sparsity penalties."""
    off = ~np.eye(S.shape[0], dtype=bool)
    value = sum(alpha * data_misfit(H, X, Y) for H, (X, Y, alpha) in zip(filters, data))
    value += sum(gamma * np.sum(commutator(S, H) ** 2) for H in filters)
    value += sum(w * np.sum(commutator(S, M) ** 2) for w, M in extra_terms)
    value += lam * np.sum(np.log(np.abs(S - S_bar)[off] + delta1))
    value += beta * np.sum(np.log(np.abs(S)[off] + delta2))
    return float(value)


# ---------------------------------------------------------------------------
# Step 1: filter estimate with S fixed
# ---------------------------------------------------------------------------


def _commutator_gram(M: np.ndarray) -> np.ndarray:
    """K^T K for K = I (x) M - M^T (x) I (the H-commutator map)."""
    n = M.shape[0]
    eye = np.eye(n)
    return np.kron(eye, M.T @ M) + np.kron(M @ M.T, eye) - np.kron(M.T, M.T) - np.kron(M, M)


def _solve_or_lstsq(A: np.ndarray, b: np.ndarray, context: str) -> np.ndarray:
    if np.linalg.cond(A) < 1e12:
        return scipy.linalg.solve(A, b, assume_a="sym")
    warnings.warn(f"{context}: singular system, minimum-norm solution used", SingularSystemWarning, stacklevel=3)
    return scipy.linalg.lstsq(A, b)[0]


def rfi_step1_kron(
    S: np.ndarray,
    X: np.ndarray,
    Y: np.ndarray,
    gamma: float,
    alpha: float = 1.0,
    extra_terms: Sequence[CommutatorTerm] = (),
) -> np.ndarray:
    """Dense N^2 x N^2 normal equations (small N, any set of commutator terms)."""
    n = S.shape[0]
    system = alpha * np.kron(X @ X.T, np.eye(n)) + gamma * _commutator_gram(S)
    for w, M in extra_terms:
        system = system + w * _commutator_gram(M)
    rhs = alpha * (Y @ X.T).flatten(order="F")
    return _solve_or_lstsq(system, rhs, "step 1").reshape((n, n), order="F")


def rfi_step1_closed_form(
    S: np.ndarray,
    X: np.ndarray,
    Y: np.ndarray,
    gamma: float,
    alpha: float = 1.0,
    extra_terms: Sequence[CommutatorTerm] = (),
) -> np.ndarray:
    """
    Exact minimizer of alpha ||Y - H X||^2 + gamma ||S H - H S||^2 (+ extra terms).

    For a symmetric S without extra terms the problem decouples row by row in
    the eigenbasis of S: with H' = V^T H V, X' = V^T X and Y' = V^T Y, row i of
    H' solves (alpha X' X'^T + gamma diag((l_i - l_j)^2)) h = alpha X' y'_i.
    """
    S = np.asarray(S, dtype=float)
    X, Y = np.asarray(X, dtype=float), np.asarray(Y, dtype=float)
    n = S.shape[0]
    if X.shape[0] != n or X.shape != Y.shape:
        raise DimensionMismatch(f"S {S.shape}, X {X.shape}, Y {Y.shape}")
    extra_terms = [(w, M) for w, M in extra_terms if w > 0]
    if extra_terms or not np.allclose(S, S.T):
        if n > DENSE_STEP1_MAX_N:
            raise InvalidParams(f"dense step 1 limited to N <= {DENSE_STEP1_MAX_N}; use the gradient variant")
        return rfi_step1_kron(S, X, Y, gamma, alpha, extra_terms)

    eigvals, V = scipy.linalg.eigh(S)
    Xp, Yp = V.T @ X, V.T @ Y
    gram = alpha * Xp @ Xp.T
    rhs = alpha * Yp @ Xp.T
    gaps = (eigvals[:, None] - eigvals[None, :]) ** 2
    Hp = np.empty((n, n))
    singular = False
    for i in range(n):
        system = gram + gamma * np.diag(gaps[i])
        if np.linalg.cond(system) < 1e12:
            Hp[i] = scipy.linalg.solve(system, rhs[i], assume_a="sym")
        else:
            singular = True
            Hp[i] = scipy.linalg.lstsq(system, rhs[i])[0]
    if singular:
        warnings.warn("step 1: singular system, minimum-norm rows used", SingularSystemWarning, stacklevel=2)
    return V @ Hp @ V.T


def step1_gradient(
    H: np.ndarray,
    S: np.ndarray,
    X: np.ndarray,
    Y: np.ndarray,
    gamma: float,
    alpha: float = 1.0,
    extra_terms: Sequence[CommutatorTerm] = (),
) -> np.ndarray:
    grad = 2 * alpha * (H @ X @ X.T - Y @ X.T)
    for w, M in [(gamma, S), *extra_terms]:
        if w > 0:
            C = M @ H - H @ M
            grad += 2 * w * (M.T @ C - C @ M.T)
    return grad


def _step1_value(H, S, X, Y, gamma, alpha, extra_terms) -> float:
    value = alpha * data_misfit(H, X, Y) + gamma * np.sum(commutator(S, H) ** 2)
    return float(value + sum(w * np.sum(commutator(M, H) ** 2) for w, M in extra_terms))


def step1_lipschitz(S, X, gamma, alpha=1.0, extra_terms: Sequence[CommutatorTerm] = ()) -> float:
    """Curvature bound 2 alpha s_max(X X^T) + 8 gamma s_max(S)^2 (+ extra terms)."""
    xx = X @ X.T
    bound = 2 * alpha * power_iteration(lambda v: xx @ v, xx.shape[0])
    for w, M in [(gamma, S), *extra_terms]:
        if w > 0:
            mm = M.T @ M
            bound += 8 * w * power_iteration(lambda v: mm @ v, mm.shape[0])
    return bound


def rfi_step1_gradient(
    S: np.ndarray,
    X: np.ndarray,
    Y: np.ndarray,
    gamma: float,
    H_init: Optional[np.ndarray] = None,
    mu: Optional[float] = None,
    n_iter: int = 50,
    alpha: float = 1.0,
    extra_terms: Sequence[CommutatorTerm] = (),
    max_restarts: int = 5,
) -> np.ndarray:
    """
    ``n_iter`` gradient steps on the Step 1 objective. The default step is
    0.9 over the curvature bound; if the objective grows tenfold the step is
    halved and the run restarted.
    """
    S, X, Y = (np.asarray(a, dtype=float) for a in (S, X, Y))
    n = S.shape[0]
    H0 = np.zeros((n, n)) if H_init is None else np.asarray(H_init, dtype=float)
    extra_terms = [(w, M) for w, M in extra_terms if w > 0]
    if mu is None:
        mu = 0.9 / max(step1_lipschitz(S, X, gamma, alpha, extra_terms), 1e-300)
    if mu <= 0:
        raise InvalidParams("step size must be > 0")
    start = _step1_value(H0, S, X, Y, gamma, alpha, extra_terms)
    for attempt in range(max_restarts + 1):
        H = H0.copy()
        diverged = False
        for _ in range(n_iter):
            H = H - mu * step1_gradient(H, S, X, Y, gamma, alpha, extra_terms)
            value = _step1_value(H, S, X, Y, gamma, alpha, extra_terms)
            if not np.isfinite(value) or value > 10 * max(start, 1e-300):
                diverged = True
                break
        if not diverged:
            return H
        mu *= 0.5
        logger.info("step 1 gradient diverged, halving the step to %.3g", mu)
    raise Divergence("step 1 gradient descent diverged after repeated step halving")


# ---------------------------------------------------------------------------
# Step 2: graph estimate with H fixed
# ---------------------------------------------------------------------------


@dataclass
class CdStats:
    sweeps: int = 0
    entries_touched: List[int] = field(default_factory=list)
    max_change: float = 0.0


def pair_minimizer(a: float, c: float, w1: float, w2: float, s_bar: float) -> float:
    """
    argmin_{s >= 0} a s^2 + c s + w1 |s - s_bar| + w2 s  (a >= 0, w1, w2 >= 0).

    With no curvature the quadratic part vanishes identically and the optimum is
    s_bar when w1 > w2, else 0.
    """
    if a <= 0:
        return max(s_bar, 0.0) if w1 > w2 else 0.0
    lin = c + w2
    above = -(lin + w1) / (2 * a)
    below = -(lin - w1) / (2 * a)
    if above > s_bar:
        s = above
    elif below < s_bar:
        s = below
    else:
        s = s_bar
    return max(s, 0.0)


class _PairGeometry:
    """Per-term quantities for the tied-pair coordinate update."""

    def __init__(self, weight: float, M: np.ndarray):
        self.weight = weight
        self.M = M
        self.row_sq = np.sum(M**2, axis=1)
        self.col_sq = np.sum(M**2, axis=0)
        diag = np.diag(M)
        # ||E M - M E||^2 for E = e_i e_j^T + e_j e_i^T
        self.curvature = (
            self.row_sq[:, None]
            + self.row_sq[None, :]
            + self.col_sq[:, None]
            + self.col_sq[None, :]
            - 4 * (np.outer(diag, diag) + M * M.T)
        )


def rfi_step2_cd(
    terms: Sequence[CommutatorTerm],
    S_bar: np.ndarray,
    S_prev: np.ndarray,
    lam: float,
    beta: float,
    weights: ReweightState,
    n_sweeps: int = 50,
    tol: float = 0.0,
    stats: Optional[CdStats] = None,
) -> np.ndarray:
    """
    Cyclic coordinate descent over the off-diagonal pairs (i, j), i < j, of a
    symmetric, nonnegative, hollow S minimizing
    sum_k w_k ||S M_k - M_k S||^2 + lam sum Omega_bar |S - S_bar| + beta sum Omega |S|.
    Each pair update is the exact 1-D minimizer; the commutators are updated
    in place on the <= 4N entries a pair change touches.
    """
    S_bar = np.asarray(S_bar, dtype=float)
    S = np.array(S_prev, dtype=float)
    n = S.shape[0]
    np.fill_diagonal(S, 0.0)
    geoms = [_PairGeometry(w, np.asarray(M, dtype=float)) for w, M in terms if w > 0]
    comms = [commutator(S, g.M) for g in geoms]
    w1_all = lam * (weights.omega_bar + weights.omega_bar.T)
    w2_all = beta * (weights.omega + weights.omega.T)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    touched_per_pair = 4 * n - 4

    for sweep in range(n_sweeps):
        max_change = 0.0
        touched = 0
        for i, j in pairs:
            a = 0.0
            lin = 0.0
            for g, C in zip(geoms, comms):
                M = g.M
                inner = C[i] @ M[j] + C[j] @ M[i] - C[:, j] @ M[:, i] - C[:, i] @ M[:, j]
                a += g.weight * g.curvature[i, j]
                lin += 2 * g.weight * inner
                touched += touched_per_pair
            s0 = S[i, j]
            c = lin - 2 * a * s0
            s_new = pair_minimizer(a, c, w1_all[i, j], w2_all[i, j], S_bar[i, j])
            d = s_new - s0
            if d != 0.0:
                S[i, j] = S[j, i] = s_new
                for g, C in zip(geoms, comms):
                    M = g.M
                    C[i] += d * M[j]
                    C[j] += d * M[i]
                    C[:, j] -= d * M[:, i]
                    C[:, i] -= d * M[:, j]
                max_change = max(max_change, abs(d))
        if stats is not None:
            stats.sweeps = sweep + 1
            stats.entries_touched.append(touched)
            stats.max_change = max_change
        if max_change <= tol * max(1.0, np.abs(S).max()):
            break
    return S


def rfi_step2_exact(
    terms: Sequence[CommutatorTerm],
    S_bar: np.ndarray,
    weights: ReweightState,
    lam: float,
    beta: float,
    S_init: Optional[np.ndarray] = None,
    tol: float = 1e-10,
    max_sweeps: int = 5000,
) -> np.ndarray:
    """Coordinate descent run to convergence (the reference Step 2 solver)."""
    stats = CdStats()
    start = S_bar if S_init is None else S_init
    S = rfi_step2_cd(terms, S_bar, start, lam, beta, weights, n_sweeps=max_sweeps, tol=tol, stats=stats)
    if stats.max_change > tol * max(1.0, np.abs(S).max()):
        raise NonConvergence(f"step 2 did not converge in {max_sweeps} sweeps")
    return S


def step2_objective(terms, S, S_bar, lam, beta, weights: ReweightState) -> float:
    value = sum(w * np.sum(commutator(S, M) ** 2) for w, M in terms)
    return float(value + lam * np.sum(weights.omega_bar * np.abs(S - S_bar)) + beta * np.sum(weights.omega * np.abs(S)))


# ---------------------------------------------------------------------------
# outer alternation
# ---------------------------------------------------------------------------


def _step1_for(
    algorithm: str,
    S: np.ndarray,
    X: np.ndarray,
    Y: np.ndarray,
    gamma: float,
    alpha: float,
    extra: Sequence[CommutatorTerm],
    H_prev: np.ndarray,
    tau1: int,
) -> np.ndarray:
    if algorithm == "Alg2":
        return rfi_step1_closed_form(S, X, Y, gamma, alpha, extra)
    return rfi_step1_gradient(S, X, Y, gamma, H_init=H_prev, n_iter=tau1, alpha=alpha, extra_terms=extra)


def _least_squares_filter(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return Y @ np.linalg.pinv(X)


def _alternate(
    data: List[Tuple[np.ndarray, np.ndarray, float]],
    problem: RfiProblem,
    algorithm: str,
    t_max: int,
    tau1: int,
    tau2: int,
    S_init: Optional[np.ndarray],
    truth: Optional[Tuple[Sequence[np.ndarray], np.ndarray]],
    tol: float,
    jobs: int = 1,
):
    if algorithm not in ("Alg2", "Alg3"):
        raise InvalidParams(f"unknown algorithm {algorithm!r}")
    S_bar = problem.S_bar
    S = np.array(S_bar if S_init is None else S_init, dtype=float)
    np.fill_diagonal(S, 0.0)
    filters = [_least_squares_filter(X, Y) for X, Y, _ in data]
    stat_terms = problem.stationarity_terms()
    h_terms = problem.filter_terms()
    report = SolverReport()
    clock = Stopwatch()
    weights = ReweightState.from_iterate(S, S_bar, problem.delta1, problem.delta2)

    def objective(fs, S_, gamma):
        return log_objective(
            fs, data, S_, S_bar, problem.lam, problem.beta, gamma, problem.delta1, problem.delta2, stat_terms
        )

    for t in range(t_max):
        gamma = problem.gamma_at(t)
        weights = ReweightState.from_iterate(S, S_bar, problem.delta1, problem.delta2)
        before = surrogate_objective(filters, data, S, S_bar, problem.lam, problem.beta, gamma, weights, stat_terms)

        def solve_k(k):
            X, Y, alpha = data[k]
            return _step1_for(algorithm, S, X, Y, gamma, alpha, h_terms, filters[k], tau1)

        if jobs > 1 and len(data) > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                new_filters = list(pool.map(solve_k, range(len(data))))
        else:
            new_filters = [solve_k(k) for k in range(len(data))]
        after1 = surrogate_objective(new_filters, data, S, S_bar, problem.lam, problem.beta, gamma, weights, stat_terms)

        terms = [(gamma, H) for H in new_filters] + stat_terms
        if algorithm == "Alg2":
            S_new = rfi_step2_exact(terms, S_bar, weights, problem.lam, problem.beta, S_init=S)
        else:
            S_new = rfi_step2_cd(terms, S_bar, S, problem.lam, problem.beta, weights, n_sweeps=tau2)
        after2 = surrogate_objective(
            new_filters, data, S_new, S_bar, problem.lam, problem.beta, gamma, weights, stat_terms
        )

        change = max(
            max(np.linalg.norm(Hn - Ho) / max(np.linalg.norm(Ho), 1e-300) for Hn, Ho in zip(new_filters, filters)),
            np.linalg.norm(S_new - S) / max(np.linalg.norm(S), 1e-300),
        )
        filters, S = new_filters, S_new
        report.objective.append(objective(filters, S, gamma))
        report.record("surrogate_before", before)
        report.record("surrogate_step1", after1)
        report.record("surrogate_step2", after2)
        report.record("seconds", clock.elapsed)
        if truth is not None:
            true_filters, true_S = truth
            report.record("nerr_H", float(np.mean([nerr(H, Ht) for H, Ht in zip(filters, true_filters)])))
            report.record("nerr_S", nerr(S, true_S))
        report.iterations = t + 1
        logger.debug("outer iteration %d: objective %.6g", t, report.objective[-1])
        if change < tol:
            report.converged = True
            break

    weights = ReweightState.from_iterate(S, S_bar, problem.delta1, problem.delta2)
    report.seconds = clock.elapsed
    return filters, S, weights, report


def rfi_solve(
    problem: RfiProblem,
    algorithm: str = "Alg2",
    t_max: int = 10,
    tau1: int = 50,
    tau2: int = 50,
    S_init: Optional[np.ndarray] = None,
    truth: Optional[Tuple[np.ndarray, np.ndarray]] = None,
    tol: float = 1e-10,
) -> RfiSolution:
    """
    Robust filter identification. ``Alg2`` solves both steps exactly; ``Alg3``
    takes ``tau1`` gradient steps for H and ``tau2`` coordinate sweeps for S.
    ``truth = (H, S)`` adds per-iteration errors to the report.
    """
    wrapped_truth = None if truth is None else ([truth[0]], truth[1])
    filters, S, weights, report = _alternate(
        [(problem.X, problem.Y, 1.0)], problem, algorithm, t_max, tau1, tau2, S_init, wrapped_truth, tol
    )
    fit = extract_coeffs(filters[0], S, problem.order)
    return RfiSolution(
        H=filters[0],
        S=Gso(S, GsoKind.ADJACENCY, validate=False),
        coeffs=fit.coeffs,
        report=report,
        weights=weights,
        coeff_residual=fit.residual,
    )


def rfi_solve_stationary(problem: RfiProblem, **kwargs) -> RfiSolution:
    """
    Robust identification with stationarity penalties mu_x ||C_x S - S C_x||^2
    and mu_y ||C_y S - S C_y||^2 on the graph step (and mu_h on the filter step).
    Covariances default to the sample covariances of X and Y.
    """
    if problem.cov_x is None:
        problem.cov_x = problem.X @ problem.X.T / problem.X.shape[1]
    if problem.cov_y is None:
        problem.cov_y = problem.Y @ problem.Y.T / problem.Y.shape[1]
    return rfi_solve(problem, **kwargs)


def joint_rfi_solve(
    datasets: Sequence[Tuple[np.ndarray, np.ndarray]],
    problem: RfiProblem,
    alphas: Optional[Sequence[float]] = None,
    algorithm: str = "Alg2",
    t_max: int = 10,
    tau1: int = 50,
    tau2: int = 50,
    truth: Optional[Tuple[Sequence[np.ndarray], np.ndarray]] = None,
    jobs: int = 1,
    tol: float = 1e-10,
) -> JointRfiSolution:
    """K filters observed on the same graph, sharing one denoised S."""
    if not datasets:
        raise InvalidParams("joint identification needs at least one dataset")
    alphas = [1.0] * len(datasets) if alphas is None else list(alphas)
    if len(alphas) != len(datasets) or any(a <= 0 for a in alphas):
        raise InvalidParams("one positive alpha per dataset required")
    data = []
    for (X, Y), alpha in zip(datasets, alphas):
        X, Y = np.asarray(X, dtype=float), np.asarray(Y, dtype=float)
        if X.shape != Y.shape or X.shape[0] != problem.n_nodes:
            raise DimensionMismatch(f"dataset shapes {X.shape}, {Y.shape} vs N={problem.n_nodes}")
        data.append((X, Y, float(alpha)))
    filters, S, weights, report = _alternate(data, problem, algorithm, t_max, tau1, tau2, None, truth, tol, jobs)
    coeffs = [extract_coeffs(H, S, problem.order).coeffs for H in filters]
    return JointRfiSolution(
        filters=filters, S=Gso(S, GsoKind.ADJACENCY, validate=False), coeffs=coeffs, report=report, weights=weights
    )


# ---------------------------------------------------------------------------
# autoregressive filter sequences
# ---------------------------------------------------------------------------


def ar_rfi_solve(
    Y_seq: Sequence[np.ndarray],
    problem: RfiProblem,
    memory: int,
    X_seq: Optional[Sequence[np.ndarray]] = None,
    t_max: int = 10,
    inner_passes: int = 1,
    truth: Optional[Tuple[Sequence[np.ndarray], np.ndarray]] = None,
) -> JointRfiSolution:
    """
    Y_k = sum_{l=1..memory} H_l Y_{k-l} + X_k. Each H_l is refitted in turn by
    the Step 1 closed form against the residual left by the other lags, then
    the graph is denoised against all lags jointly. ``problem.X``/``Y`` are
    ignored.
    """
    Y_seq = [np.atleast_2d(np.asarray(y, dtype=float).T).T for y in Y_seq]
    T = len(Y_seq)
    if memory < 1 or T <= memory:
        raise InvalidParams(f"need more than memory={memory} time steps, got {T}")
    if X_seq is None:
        X_seq = [np.zeros_like(y) for y in Y_seq]
    else:
        X_seq = [np.atleast_2d(np.asarray(x, dtype=float).T).T for x in X_seq]
        if len(X_seq) != T:
            raise DimensionMismatch(f"{len(X_seq)} inputs for {T} outputs")
    n = problem.n_nodes
    S_bar = problem.S_bar
    S = S_bar.copy()
    np.fill_diagonal(S, 0.0)
    times = range(memory, T)
    lagged = [np.hstack([Y_seq[k - lag] for k in times]) for lag in range(1, memory + 1)]
    target = np.hstack([Y_seq[k] - X_seq[k] for k in times])
    filters = [np.zeros((n, n)) for _ in range(memory)]
    report = SolverReport()
    clock = Stopwatch()
    weights = ReweightState.from_iterate(S, S_bar, problem.delta1, problem.delta2)

    for t in range(t_max):
        gamma = problem.gamma_at(t)
        weights = ReweightState.from_iterate(S, S_bar, problem.delta1, problem.delta2)
        for _ in range(inner_passes):
            for lag in range(memory):
                others = sum((filters[l] @ lagged[l] for l in range(memory) if l != lag), np.zeros_like(target))
                filters[lag] = rfi_step1_closed_form(S, lagged[lag], target - others, gamma)
        terms = [(gamma, H) for H in filters]
        S = rfi_step2_exact(terms, S_bar, weights, problem.lam, problem.beta, S_init=S)
        fitted = sum((H @ Yl for H, Yl in zip(filters, lagged)), np.zeros_like(target))
        report.objective.append(data_misfit(np.eye(n), fitted, target))
        report.record("seconds", clock.elapsed)
        if truth is not None:
            report.record("nerr_H", float(np.mean([nerr(H, Ht) for H, Ht in zip(filters, truth[0])])))
            report.record("nerr_S", nerr(S, truth[1]))
        report.iterations = t + 1
    report.seconds = clock.elapsed
    coeffs = [extract_coeffs(H, S, problem.order).coeffs for H in filters]
    return JointRfiSolution(
        filters=filters, S=Gso(S, GsoKind.ADJACENCY, validate=False), coeffs=coeffs, report=report, weights=weights
    )


def ar_predict(filters: Sequence[np.ndarray], history: Sequence[np.ndarray], x_next=None) -> np.ndarray:
    """One-step-ahead prediction from the last ``len(filters)`` outputs (oldest first)."""
    if len(history) < len(filters):
        raise InvalidParams(f"need {len(filters)} past outputs, got {len(history)}")
    pred = sum(H @ np.asarray(history[-(lag + 1)], dtype=float) for lag, H in enumerate(filters))
    return pred if x_next is None else pred + np.asarray(x_next, dtype=float)


def ar_forecast(
    filters: Sequence[np.ndarray], history: Sequence[np.ndarray], steps: int, X_future=None
) -> List[np.ndarray]:
    """Multi-step prediction by feeding predictions back as history."""
    buffer = [np.asarray(h, dtype=float) for h in history]
    out = []
    for step in range(steps):
        x_next = None if X_future is None else X_future[step]
        nxt = ar_predict(filters, buffer, x_next)
        out.append(nxt)
        buffer.append(nxt)
    return out


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------


@dataclass
class IdentifiabilityReport:
    min_eigen_gap: float
    min_excitation: float
    identifiable: bool


def check_identifiability(S, X, gap_tol: float = 1e-9, excitation_tol: float = 1e-9) -> IdentifiabilityReport:
    """
    H is unique given S and X when S has simple eigenvalues and every
    frequency of X is excited by at least one signal.
    """
    if isinstance(S, Gso):
        gso = S
    else:
        M = np.asarray(S, dtype=float)
        kind = GsoKind.SYMMETRIC if np.allclose(M, M.T) else GsoKind.DIAGONALIZABLE
        gso = Gso(M, kind, validate=False)
    eigvals = gso.eigenvalues
    n = eigvals.size
    gaps = np.abs(eigvals[:, None] - eigvals[None, :]) + np.diag(np.full(n, np.inf))
    min_gap = float(gaps.min()) if n > 1 else np.inf
    excitation = np.abs(gso.inverse_eigenvectors @ np.asarray(X, dtype=float)).max(axis=1)
    min_exc = float(excitation.min())
    return IdentifiabilityReport(min_gap, min_exc, bool(min_gap > gap_tol and min_exc > excitation_tol))


@dataclass
class CoeffFit:
    coeffs: np.ndarray
    residual: float
    condition: float


def extract_coeffs(H: np.ndarray, S, order: int) -> CoeffFit:
    """Least-squares coefficients h with H ~ sum_r h_r S^r."""
    S = np.asarray(S.matrix if isinstance(S, Gso) else S, dtype=float)
    H = np.asarray(H, dtype=float)
    n = S.shape[0]
    if not 1 <= order <= n:
        raise InvalidParams(f"order must lie in [1, {n}]")
    columns = []
    power = np.eye(n)
    for _ in range(order):
        columns.append(power.ravel())
        power = power @ S
    basis = np.column_stack(columns)
    cond = float(np.linalg.cond(basis))
    if cond > 1e12:
        warnings.warn(f"power basis condition number {cond:.3g}", IllConditionedWarning, stacklevel=2)
    coeffs = scipy.linalg.lstsq(basis, H.ravel())[0]
    residual = float(np.linalg.norm(H.ravel() - basis @ coeffs))
    return CoeffFit(coeffs=coeffs, residual=residual, condition=cond)


def stationarity_residual(
    problem: RfiProblem,
    H: np.ndarray,
    S: np.ndarray,
    filters: Optional[Sequence[np.ndarray]] = None,
) -> Dict[str, float]:
    """
    First-order optimality violation of the reweighted objective at (H, S),
    with the weights taken at S itself: the relative gradient norm in H and the
    largest subgradient violation over the pairs of S.
    """
    S = np.asarray(S, dtype=float)
    filters = [H] if filters is None else list(filters)
    gamma = problem.gamma
    grad_H = step1_gradient(H, S, problem.X, problem.Y, gamma, 1.0, problem.filter_terms())
    scale_H = max(np.linalg.norm(2 * problem.Y @ problem.X.T), 1e-300)
    weights = ReweightState.from_iterate(S, problem.S_bar, problem.delta1, problem.delta2)
    terms = [(gamma, F) for F in filters] + problem.stationarity_terms()
    comms = [(w, M, commutator(S, M)) for w, M in terms if w > 0]
    n = S.shape[0]
    worst = 0.0
    scale_S = 1.0
    for i in range(n):
        for j in range(i + 1, n):
            g = 0.0
            for w, M, C in comms:
                g += 2 * w * (C[i] @ M[j] + C[j] @ M[i] - C[:, j] @ M[:, i] - C[:, i] @ M[:, j])
            w1 = problem.lam * (weights.omega_bar[i, j] + weights.omega_bar[j, i])
            w2 = problem.beta * (weights.omega[i, j] + weights.omega[j, i])
            s, s_bar = S[i, j], problem.S_bar[i, j]
            base = g + w2
            if s > 0 and abs(s - s_bar) > 1e-12:
                viol = abs(base + w1 * np.sign(s - s_bar))
            elif s > 0:
                viol = max(abs(base) - w1, 0.0)
            else:
                slope = base + (w1 if s_bar <= 1e-12 else -w1)
                viol = max(-slope, 0.0)
            worst = max(worst, viol)
            scale_S = max(scale_S, abs(g), w1, w2)
    return {"H": float(np.linalg.norm(grad_H) / scale_H), "S": float(worst / scale_S)}
