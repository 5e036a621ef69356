"""
Network topology inference from stationary signals with hidden nodes.

Observed nodes O and hidden nodes H split the shift S and covariance C into
blocks. Stationarity (C S = S C) restricted to the observed block reads

    C_O S_O + P = S_O C_O + P^T,    P = C_OH S_HO,

where P is low rank (rank <= H) and column sparse. The solvers recover S_O in
the adjacency set S_A together with P, for one graph or for K related graphs
sharing their node set, with one consensus-ADMM engine.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, InfeasibleProblem, InvalidParams, NonConvergence, ZeroReference
from .graph_core import Gso, filter_from_coeffs, random_graph, sample_covariance
from .perturbation import PerturbationSpec, perturb
from .solvers import (
    SolverReport,
    Stopwatch,
    l21_norm,
    nuclear_norm,
    project_adjacency_set,
    prox_columns,
    prox_matrix,
    prox_pairwise_l1,
)

logger = logging.getLogger(__name__)

SUPPORT_TOL = 1e-6


@dataclass
class HiddenObservation:
    """Observed-block covariance C_O (and the signals it came from, if any)."""

    C_O: np.ndarray
    n_hidden: int = 0
    X_O: Optional[np.ndarray] = None

    def __post_init__(self):
        self.C_O = np.asarray(self.C_O, dtype=float)
        if self.C_O.ndim != 2 or self.C_O.shape[0] != self.C_O.shape[1]:
            raise DimensionMismatch(f"C_O must be square, got {self.C_O.shape}")
        if self.n_hidden < 0:
            raise InvalidParams("n_hidden must be >= 0")

    @classmethod
    def from_signals(cls, X_O: np.ndarray, n_hidden: int = 0) -> "HiddenObservation":
        X_O = np.asarray(X_O, dtype=float)
        return cls(C_O=sample_covariance(X_O), n_hidden=n_hidden, X_O=X_O)

    @property
    def n_observed(self) -> int:
        return self.C_O.shape[0]


@dataclass
class TopoSolution:
    S_list: List[np.ndarray]
    P_list: List[Optional[np.ndarray]]
    report: SolverReport

    @property
    def S(self) -> np.ndarray:
        return self.S_list[0]

    @property
    def P(self) -> Optional[np.ndarray]:
        return self.P_list[0]

    def graphs(self) -> List[Gso]:
        return [Gso(S, validate=False) for S in self.S_list]

    def active_columns(self, tol: float = SUPPORT_TOL) -> List[np.ndarray]:
        """Indices of the columns of each P with l2 norm above ``tol``."""
        return [
            np.flatnonzero(np.linalg.norm(P, axis=0) > tol) if P is not None else np.array([], dtype=int)
            for P in self.P_list
        ]

    def group_sparsity(self, tol: float = SUPPORT_TOL) -> List[int]:
        return [cols.size for cols in self.active_columns(tol)]


@dataclass
class JointTopoProblem:
    """
    Weights of the joint program. ``beta`` and ``eta`` couple every pair of
    graphs (a scalar applies to all pairs, a K x K array sets each pair).
    ``hidden_aware=False`` drops the P blocks entirely.
    """

    n_graphs: int
    alpha: Union[float, Sequence[float]] = 1.0
    beta: Union[float, np.ndarray] = 0.5
    gamma: Union[float, Sequence[float]] = 1.0
    eta: Union[float, np.ndarray] = 0.5
    mu: Union[float, Sequence[float]] = 100.0
    delta: float = 1e-3
    passes: int = 3
    hidden_aware: bool = True

    def __post_init__(self):
        if self.n_graphs < 1:
            raise InvalidParams("a joint problem needs K >= 1 graphs")
        K = self.n_graphs
        self.alpha = _per_graph(self.alpha, K, "alpha")
        self.gamma = _per_graph(self.gamma, K, "gamma")
        self.mu = _per_graph(self.mu, K, "mu")
        self.beta = _pairwise(self.beta, K, "beta")
        self.eta = _pairwise(self.eta, K, "eta")
        if self.delta <= 0 or self.passes < 1:
            raise InvalidParams("delta must be > 0 and passes >= 1")

    def scale_mu_for_samples(self, n_samples: int, n_observed: int) -> None:
        """Sample-covariance weighting mu_k * M / (M + O)."""
        self.mu = self.mu * n_samples / (n_samples + n_observed)


def _per_graph(value, K: int, name: str) -> np.ndarray:
    arr = np.full(K, float(value)) if np.isscalar(value) else np.asarray(value, dtype=float)
    if arr.shape != (K,) or (arr < 0).any():
        raise InvalidParams(f"{name} needs {K} nonnegative entries")
    return arr


def _pairwise(value, K: int, name: str) -> np.ndarray:
    arr = np.full((K, K), float(value)) if np.isscalar(value) else np.asarray(value, dtype=float)
    if arr.shape != (K, K) or (arr < 0).any():
        raise InvalidParams(f"{name} needs a nonnegative {K}x{K} array")
    return arr


# ---------------------------------------------------------------------------
# stationarity map
# ---------------------------------------------------------------------------


def commutator_residual(C_O: np.ndarray, S_O: np.ndarray, P: Optional[np.ndarray] = None) -> float:
    """||C_O S_O + P - S_O C_O - P^T||_F."""
    C_O, S_O = np.asarray(C_O, dtype=float), np.asarray(S_O, dtype=float)
    if C_O.shape != S_O.shape:
        raise DimensionMismatch(f"{C_O.shape} vs {S_O.shape}")
    residual = C_O @ S_O - S_O @ C_O
    if P is not None:
        residual = residual + P - P.T
    return float(np.linalg.norm(residual))


def _transpose_operator(n: int) -> np.ndarray:
    """T with T vec(X) = vec(X^T), column-major."""
    idx = np.arange(n * n).reshape((n, n), order="F")
    T = np.zeros((n * n, n * n))
    T[idx.T.ravel(order="F"), idx.ravel(order="F")] = 1.0
    return T


def stationarity_operator(C_O: np.ndarray, hidden: bool) -> np.ndarray:
    """Matrix A with A [vec S; vec P] = vec(C S - S C + P - P^T)."""
    n = C_O.shape[0]
    eye = np.eye(n)
    A_S = np.kron(eye, C_O) - np.kron(C_O, eye)
    if not hidden:
        return A_S
    return np.hstack([A_S, np.eye(n * n) - _transpose_operator(n)])


# ---------------------------------------------------------------------------
# consensus ADMM engine
# ---------------------------------------------------------------------------


@dataclass
class _Graph:
    C: np.ndarray
    mu: float
    hidden: bool
    eps: Optional[float]
    A: np.ndarray = field(init=False)

    def __post_init__(self):
        self.A = stationarity_operator(self.C, self.hidden)

    @property
    def n(self) -> int:
        return self.C.shape[0]

    def dim(self) -> int:
        return self.n * self.n * (2 if self.hidden else 1)

    def part(self, x: np.ndarray, name: str) -> np.ndarray:
        nn = self.n * self.n
        vec = x[:nn] if name == "S" else x[nn:]
        return vec.reshape((self.n, self.n), order="F")

    def slot(self, name: str) -> slice:
        nn = self.n * self.n
        return slice(0, nn) if name == "S" else slice(nn, 2 * nn)


class _Term:
    """A nonsmooth term acting on copies of (graph, part) variables."""

    def __init__(self, refs: Sequence[Tuple[int, str]]):
        self.refs = list(refs)

    def prox(self, values: List[np.ndarray], rho: float) -> List[np.ndarray]:
        raise NotImplementedError

    def penalty(self, values: List[np.ndarray]) -> float:
        raise NotImplementedError


class _WeightedL1Adjacency(_Term):
    """alpha * sum W |S| + indicator(S in S_A); exact prox P_SA(V - alpha W / rho)."""

    def __init__(self, k: int, alpha: float, weights: np.ndarray):
        super().__init__([(k, "S")])
        self.alpha = alpha
        self.weights = weights

    def prox(self, values, rho):
        return [project_adjacency_set(values[0] - self.alpha * self.weights / rho)]

    def penalty(self, values):
        return float(self.alpha * np.sum(self.weights * np.abs(values[0])))


class _Nuclear(_Term):
    def __init__(self, k: int, gamma: float):
        super().__init__([(k, "P")])
        self.gamma = gamma

    def prox(self, values, rho):
        return [prox_matrix(values[0], self.gamma / rho)]

    def penalty(self, values):
        return self.gamma * nuclear_norm(values[0])


class _ColumnGroup(_Term):
    """gamma * ||P||_{2,1}; with two refs the columns of [P_k; P_k'] form the groups."""

    def __init__(self, refs, gamma: float):
        super().__init__(refs)
        self.gamma = gamma

    def prox(self, values, rho):
        stacked = prox_columns(np.vstack(values), self.gamma / rho)
        return np.vsplit(stacked, len(values))

    def penalty(self, values):
        return self.gamma * l21_norm(np.vstack(values))


class _PairwiseL1(_Term):
    def __init__(self, k: int, k2: int, beta: float):
        super().__init__([(k, "S"), (k2, "S")])
        self.beta = beta

    def prox(self, values, rho):
        return list(prox_pairwise_l1(values[0], values[1], self.beta / rho))

    def penalty(self, values):
        return float(self.beta * np.abs(values[0] - values[1]).sum())


@dataclass
class _AdmmState:
    Z: List[List[np.ndarray]]
    U: List[List[np.ndarray]]
    Zb: List[Optional[np.ndarray]]
    Ub: List[Optional[np.ndarray]]
    rho: float


def _project_ball(v: np.ndarray, radius: float) -> np.ndarray:
    norm = np.linalg.norm(v)
    return v if norm <= radius else v * (radius / norm)


class ConsensusAdmm:
    """
    Scaled-form consensus ADMM: every nonsmooth term holds its own copy of the
    variables it touches; the commutator penalty (or the split y = A x of the
    ball constraint) is handled in the x-update by a direct Cholesky solve
    per graph.
    """

    def __init__(
        self,
        graphs: List[_Graph],
        terms: List[_Term],
        rho: float = 1.0,
        rel_tol: float = 1e-5,
        abs_tol: float = 1e-8,
        max_iter: int = 5000,
        balance_every: int = 50,
    ):
        self.graphs = graphs
        self.terms = terms
        self.rho = rho
        self.rel_tol = rel_tol
        self.abs_tol = abs_tol
        self.max_iter = max_iter
        if max_iter < 1:
            raise InvalidParams("max_iter must be >= 1")
        self.balance_every = balance_every
        self._copies = []
        for k, g in enumerate(graphs):
            counts = {"S": 0, "P": 0}
            for term in terms:
                for kk, name in term.refs:
                    if kk == k:
                        counts[name] += 1
            if counts["S"] == 0 or (g.hidden and counts["P"] == 0):
                raise InvalidParams(f"graph {k} has a variable no term touches")
            self._copies.append(counts)
        self._factors = None

    def _factorize(self, rho: float):
        factors = []
        for g, counts in zip(self.graphs, self._copies):
            diag = np.zeros(g.dim())
            diag[g.slot("S")] = counts["S"]
            if g.hidden:
                diag[g.slot("P")] = counts["P"]
            AtA = g.A.T @ g.A
            system = rho * np.diag(diag)
            system += rho * AtA if g.eps is not None else 2 * g.mu * AtA
            factors.append(scipy.linalg.cho_factor(system))
        self._factors = factors

    def initial_state(self) -> _AdmmState:
        Z, U = [], []
        for term in self.terms:
            Z.append([np.zeros((self.graphs[k].n,) * 2) for k, _ in term.refs])
            U.append([np.zeros((self.graphs[k].n,) * 2) for k, _ in term.refs])
        Zb = [np.zeros(g.n * g.n) if g.eps is not None else None for g in self.graphs]
        Ub = [np.zeros(g.n * g.n) if g.eps is not None else None for g in self.graphs]
        return _AdmmState(Z=Z, U=U, Zb=Zb, Ub=Ub, rho=self.rho)

    def _x_update(self, state: _AdmmState) -> List[np.ndarray]:
        rhs = [np.zeros(g.dim()) for g in self.graphs]
        for term, Zt, Ut in zip(self.terms, state.Z, state.U):
            for (k, name), z, u in zip(term.refs, Zt, Ut):
                rhs[k][self.graphs[k].slot(name)] += state.rho * (z - u).ravel(order="F")
        for k, g in enumerate(self.graphs):
            if g.eps is not None:
                rhs[k] += state.rho * g.A.T @ (state.Zb[k] - state.Ub[k])
        return [scipy.linalg.cho_solve(f, r) for f, r in zip(self._factors, rhs)]

    def objective(self, xs: List[np.ndarray], state: _AdmmState) -> float:
        value = sum(term.penalty(Zt) for term, Zt in zip(self.terms, state.Z))
        for g, x in zip(self.graphs, xs):
            if g.eps is None:
                value += g.mu * float(np.sum((g.A @ x) ** 2))
        return float(value)

    def constraint_excess(self, xs: List[np.ndarray]) -> float:
        excess = 0.0
        for g, x in zip(self.graphs, xs):
            if g.eps is not None:
                excess = max(excess, np.linalg.norm(g.A @ x) - g.eps)
        return excess

    def run(self, state: _AdmmState, report: SolverReport) -> Tuple[List[np.ndarray], bool]:
        if self._factors is None or state.rho != self.rho:
            self.rho = state.rho
            self._factorize(state.rho)
        n_copies = sum(z.size for Zt in state.Z for z in Zt) + sum(
            zb.size for zb in state.Zb if zb is not None
        )
        for itr in range(self.max_iter):
            xs = self._x_update(state)
            primal_sq = dual_sq = lx_sq = z_sq = u_sq = 0.0
            for t, term in enumerate(self.terms):
                views = [self.graphs[k].part(xs[k], name) for k, name in term.refs]
                inputs = [v + u for v, u in zip(views, state.U[t])]
                new_Z = term.prox(inputs, state.rho)
                for i, (v, z_new) in enumerate(zip(views, new_Z)):
                    dual_sq += np.sum((z_new - state.Z[t][i]) ** 2)
                    state.U[t][i] = state.U[t][i] + v - z_new
                    primal_sq += np.sum((v - z_new) ** 2)
                    lx_sq += np.sum(v**2)
                    z_sq += np.sum(z_new**2)
                    u_sq += np.sum(state.U[t][i] ** 2)
                state.Z[t] = new_Z
            for k, g in enumerate(self.graphs):
                if g.eps is None:
                    continue
                Ax = g.A @ xs[k]
                zb = _project_ball(Ax + state.Ub[k], g.eps)
                dual_sq += np.sum((zb - state.Zb[k]) ** 2)
                state.Ub[k] = state.Ub[k] + Ax - zb
                primal_sq += np.sum((Ax - zb) ** 2)
                lx_sq += np.sum(Ax**2)
                z_sq += np.sum(zb**2)
                u_sq += np.sum(state.Ub[k] ** 2)
                state.Zb[k] = zb

            primal = np.sqrt(primal_sq)
            dual = state.rho * np.sqrt(dual_sq)
            eps_pri = np.sqrt(n_copies) * self.abs_tol + self.rel_tol * max(np.sqrt(lx_sq), np.sqrt(z_sq))
            eps_dual = np.sqrt(n_copies) * self.abs_tol + self.rel_tol * state.rho * np.sqrt(u_sq)
            report.objective.append(self.objective(xs, state))
            report.record("primal", primal)
            report.record("dual", dual)
            report.record("constraint_excess", self.constraint_excess(xs))
            report.iterations += 1
            if primal <= eps_pri and dual <= eps_dual:
                return xs, True

            if (itr + 1) % self.balance_every == 0:
                scale = 1.0
                if primal > 10 * dual:
                    scale = 2.0
                elif dual > 10 * primal:
                    scale = 0.5
                if scale != 1.0:
                    state.rho *= scale
                    state.U = [[u / scale for u in Ut] for Ut in state.U]
                    state.Ub = [ub / scale if ub is not None else None for ub in state.Ub]
                    self.rho = state.rho
                    self._factorize(state.rho)
        return xs, False


def _stagnated(trace: List[float], window: int = 500) -> bool:
    """True when the last ``window`` entries shrank by less than 1%; a shorter trace never counts."""
    if len(trace) < window:
        return False
    recent = trace[-window:]
    return recent[-1] > 0.99 * recent[0]


def _solve_reweighted(
    observations: Sequence[HiddenObservation],
    build_terms,
    mus: Sequence[float],
    hidden: bool,
    eps: Optional[Sequence[float]],
    passes: int,
    delta: float,
    rho: float,
    rel_tol: float,
    abs_tol: float,
    max_iter: int,
    raise_on_cap: bool,
) -> TopoSolution:
    """Run ``passes`` reweighted ADMM solves; weights W = 1/(S + delta) from the previous pass."""
    graphs = [
        _Graph(C=obs.C_O, mu=float(mu), hidden=hidden, eps=None if eps is None else float(e))
        for obs, mu, e in zip(observations, mus, eps if eps is not None else [None] * len(observations))
    ]
    n = graphs[0].n
    if any(g.n != n for g in graphs):
        raise DimensionMismatch("all graphs must share the observed node set")
    weights = [np.ones((n, n)) for _ in graphs]
    report = SolverReport()
    clock = Stopwatch()
    state = None
    S_list: List[np.ndarray] = []
    P_list: List[Optional[np.ndarray]] = []
    supports = []
    converged = True

    for t in range(passes):
        terms = build_terms(weights)
        engine = ConsensusAdmm(graphs, terms, rho=rho if state is None else state.rho,
                               rel_tol=rel_tol, abs_tol=abs_tol, max_iter=max_iter)
        fresh = engine.initial_state()
        if state is not None:
            # warm start: the term layout is identical across passes
            fresh.Z, fresh.U, fresh.Zb, fresh.Ub = state.Z, state.U, state.Zb, state.Ub
        state = fresh
        xs, ok = engine.run(state, report)
        converged = converged and ok

        S_list, P_list = _extract(graphs, terms, state, xs)
        support = sum(int(np.count_nonzero(S > SUPPORT_TOL)) for S in S_list)
        if t >= 1 and supports and support > supports[-1]:
            logger.warning("reweighting pass %d grew the support from %d to %d entries", t, supports[-1], support)
            report.flags["support_increase"] = True
        supports.append(support)
        weights = [1.0 / (S + delta) for S in S_list]
        logger.debug("reweight pass %d: %d iterations, support %d", t, report.iterations, support)

        if not ok and eps is not None and engine.constraint_excess(xs) > 1e-8 and _stagnated(
            report.residuals["constraint_excess"]
        ):
            raise InfeasibleProblem("stationarity ball too small: constraint residual stagnated above epsilon")

    report.extra["support_per_pass"] = supports
    report.converged = converged
    if eps is not None:
        active = any(
            commutator_residual(g.C, S, P) >= 0.999 * g.eps
            for g, S, P in zip(graphs, S_list, P_list)
        )
        report.flags["constraint_active"] = bool(active)
    report.seconds = clock.elapsed
    if not converged:
        if raise_on_cap:
            raise NonConvergence(f"ADMM did not reach tolerance within {max_iter} iterations")
        logger.warning("ADMM hit the %d-iteration cap", max_iter)
    return TopoSolution(S_list=S_list, P_list=P_list, report=report)


def _extract(graphs, terms, state, xs):
    """S from its S_A-projected copy, P from its penalty copy (or x if none)."""
    S_list = [None] * len(graphs)
    P_list: List[Optional[np.ndarray]] = [None] * len(graphs)
    for t, term in enumerate(terms):
        for (k, name), z in zip(term.refs, state.Z[t]):
            if name == "S" and isinstance(term, _WeightedL1Adjacency):
                S_list[k] = z.copy()
            elif name == "P" and P_list[k] is None:
                P_list[k] = z.copy()
    for k, g in enumerate(graphs):
        if g.hidden and P_list[k] is None:
            P_list[k] = g.part(xs[k], "P").copy()
    return S_list, P_list


# ---------------------------------------------------------------------------
# public solvers
# ---------------------------------------------------------------------------


def topo_single_solve(
    obs: HiddenObservation,
    gamma: float = 1.0,
    eps: Optional[float] = None,
    variant: str = "NuclearL1",
    passes: int = 3,
    mu: float = 100.0,
    p_penalty: str = "nuclear",
    hidden: bool = True,
    delta: float = 1e-3,
    rho: float = 1.0,
    rel_tol: float = 1e-5,
    abs_tol: float = 1e-8,
    max_iter: int = 5000,
    raise_on_cap: bool = True,
) -> TopoSolution:
    """
    Sparse S_O plus a low-rank (``p_penalty="nuclear"``) or column-sparse
    (``"group"``) hidden footprint P.

    ``eps=None`` selects the penalized mode mu ||A(S, P)||^2; a number selects
    the constraint ||A(S, P)||_F <= eps. ``NuclearL1`` is a single solve,
    ``ReweightedNuclear`` runs ``passes`` reweighted solves.
    """
    if gamma < 0 or mu < 0 or (eps is not None and eps < 0):
        raise InvalidParams("gamma, mu and eps must be >= 0")
    if variant not in ("NuclearL1", "ReweightedNuclear"):
        raise InvalidParams(f"unknown variant {variant!r}")
    if p_penalty not in ("nuclear", "group"):
        raise InvalidParams(f"unknown P penalty {p_penalty!r}")

    def build_terms(weights):
        terms: List[_Term] = [_WeightedL1Adjacency(0, 1.0, weights[0])]
        if hidden:
            terms.append(_Nuclear(0, gamma) if p_penalty == "nuclear" else _ColumnGroup([(0, "P")], gamma))
        return terms

    return _solve_reweighted(
        [obs],
        build_terms,
        [mu],
        hidden,
        None if eps is None else [eps],
        passes if variant == "ReweightedNuclear" else 1,
        delta,
        rho,
        rel_tol,
        abs_tol,
        max_iter,
        raise_on_cap,
    )


def full_observation_stationary_solve(
    C: np.ndarray, eps: Optional[float] = None, mu: float = 100.0, **kwargs
) -> np.ndarray:
    """Sparsest S in S_A commuting with C (no hidden block)."""
    solution = topo_single_solve(HiddenObservation(C_O=C), eps=eps, mu=mu, hidden=False, **kwargs)
    return solution.S


def topo_joint_solve(
    problem: JointTopoProblem,
    observations: Sequence[HiddenObservation],
    rho: float = 1.0,
    rel_tol: float = 1e-5,
    abs_tol: float = 1e-8,
    max_iter: int = 5000,
    raise_on_cap: bool = True,
) -> TopoSolution:
    """
    K graphs on a shared node set: weighted l1 per graph, pairwise
    ||S_k - S_k'||_1, per-graph l_{2,1} on P_k, pairwise l_{2,1} on the tall
    [P_k; P_k'] and quadratic commutator penalties, reweighted ``passes`` times.
    """
    if len(observations) != problem.n_graphs:
        raise DimensionMismatch(f"{len(observations)} observations for K={problem.n_graphs}")
    K = problem.n_graphs
    hidden = problem.hidden_aware

    def build_terms(weights):
        terms: List[_Term] = [_WeightedL1Adjacency(k, problem.alpha[k], weights[k]) for k in range(K)]
        for k in range(K):
            for k2 in range(k + 1, K):
                if problem.beta[k, k2] > 0:
                    terms.append(_PairwiseL1(k, k2, problem.beta[k, k2]))
        if hidden:
            terms.extend(_ColumnGroup([(k, "P")], problem.gamma[k]) for k in range(K))
            for k in range(K):
                for k2 in range(k + 1, K):
                    if problem.eta[k, k2] > 0:
                        terms.append(_ColumnGroup([(k, "P"), (k2, "P")], problem.eta[k, k2]))
        return terms

    return _solve_reweighted(
        observations,
        build_terms,
        problem.mu,
        hidden,
        None,
        problem.passes,
        problem.delta,
        rho,
        rel_tol,
        abs_tol,
        max_iter,
        raise_on_cap,
    )


# ---------------------------------------------------------------------------
# metrics and planted instances
# ---------------------------------------------------------------------------


def joint_error(estimates: Sequence[np.ndarray], truths: Sequence[np.ndarray]) -> float:
    """(1/K) sum_k ||S_k - S_hat_k||_F^2 / ||S_k||_F^2, normalized per graph."""
    if len(estimates) != len(truths) or not truths:
        raise DimensionMismatch(f"{len(estimates)} estimates for {len(truths)} graphs")
    total = 0.0
    for est, truth in zip(estimates, truths):
        est = np.asarray(est.matrix if isinstance(est, Gso) else est, dtype=float)
        truth = np.asarray(truth.matrix if isinstance(truth, Gso) else truth, dtype=float)
        ref = np.sum(truth**2)
        if ref == 0:
            raise ZeroReference("a reference graph is all zeros")
        total += np.sum((truth - est) ** 2) / ref
    return float(total / len(truths))


def support_fscore(estimate: np.ndarray, truth: np.ndarray, tol: float = 1e-3) -> float:
    """F1 score of the off-diagonal support of ``estimate`` against ``truth``."""
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    off = ~np.eye(truth.shape[0], dtype=bool)
    est_support = (np.abs(estimate) > tol * max(np.abs(estimate).max(), 1e-300)) & off
    true_support = (np.abs(truth) > 0) & off
    tp = np.count_nonzero(est_support & true_support)
    if tp == 0:
        return 0.0
    precision = tp / np.count_nonzero(est_support)
    recall = tp / np.count_nonzero(true_support)
    return float(2 * precision * recall / (precision + recall))


def column_jaccard(solution: TopoSolution, tol: float = 1e-3) -> float:
    """Median pairwise Jaccard overlap of the active P columns across graphs."""
    sets = [set(cols.tolist()) for cols in solution.active_columns(tol)]
    scores = []
    for i in range(len(sets)):
        for j in range(i + 1, len(sets)):
            union = sets[i] | sets[j]
            scores.append(len(sets[i] & sets[j]) / len(union) if union else 1.0)
    return float(np.median(scores)) if scores else 1.0


@dataclass
class PlantedHidden:
    observation: HiddenObservation
    S: np.ndarray
    C: np.ndarray
    S_O: np.ndarray
    P: np.ndarray


def split_hidden(S: np.ndarray, C: np.ndarray, n_hidden: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Observed blocks (C_O, S_O) and the footprint P = C_OH S_HO; hidden nodes are the last ones."""
    n = S.shape[0]
    o = n - n_hidden
    if not 0 <= n_hidden < n:
        raise InvalidParams(f"n_hidden must lie in [0, {n})")
    return C[:o, :o], S[:o, :o], C[:o, o:] @ S[o:, :o]


def planted_hidden(
    gso: Gso, n_hidden: int, seed=None, n_samples: Optional[int] = None, order: int = 3
) -> PlantedHidden:
    """
    Stationary instance with C = H^2, H a random polynomial of S. With
    ``n_samples`` the observation uses the sample covariance of that many
    draws, otherwise the exact covariance.
    """
    rng = np.random.default_rng(seed)
    S = np.asarray(gso.matrix)
    coeffs = rng.standard_normal(order)
    coeffs /= np.abs(coeffs).sum()
    H = filter_from_coeffs(coeffs, S / max(gso.spectral_norm(), 1e-300))
    C = H @ H
    C_O, S_O, P = split_hidden(S, C, n_hidden)
    o = S.shape[0] - n_hidden
    if n_samples is None:
        obs = HiddenObservation(C_O=C_O, n_hidden=n_hidden)
    else:
        X = H @ rng.standard_normal((S.shape[0], n_samples))
        obs = HiddenObservation.from_signals(X[:o], n_hidden=n_hidden)
    return PlantedHidden(observation=obs, S=S, C=C, S_O=S_O, P=P)


def planted_joint_instance(
    n_nodes: int,
    p: float,
    n_graphs: int,
    n_hidden: int,
    rewire_fraction: float = 0.1,
    seed=None,
    n_samples: Optional[int] = None,
) -> List[PlantedHidden]:
    """K related ER graphs: one base graph, each copy rewired by ``rewire_fraction``."""
    seeds = np.random.SeedSequence(seed).spawn(2 * n_graphs + 1)
    base = random_graph("ER", {"n_nodes": n_nodes, "p": p}, seed=seeds[0])
    spec = PerturbationSpec.rewire(rewire_fraction)
    instances = []
    for k in range(n_graphs):
        graph = base if k == 0 or rewire_fraction == 0 else perturb(base, spec, seed=seeds[1 + k])[0]
        instances.append(planted_hidden(graph, n_hidden, seed=seeds[1 + n_graphs + k], n_samples=n_samples))
    return instances
