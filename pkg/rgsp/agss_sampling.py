"""
Aggregation sampling of graph signals and recovery of sparse seeds that were
diffused through a graph filter.

A node ``i`` observes its own value after successive shifts of the signal,
``z_i = [x_i, (Sx)_i, (S^2 x)_i, ...]``, and keeps the subset of shift indices
selected by ``Pi_Q``. Every recovery routine here works on an
:class:`ObservationMatrix` (the linear map from the unknowns to ``z_i``) plus
the list of kept rows.
"""

import itertools
import logging
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.optimize

from .errors import (
    DegenerateSolutionWarning,
    DimensionMismatch,
    FrequencyBlind,
    IllConditionedWarning,
    InfeasibleProblem,
    InfeasibleStart,
    InvalidParams,
    InvalidSelection,
    NonConvergence,
    RankDeficient,
    RankDeficientWarning,
    SingularNoiseCov,
)
from .graph_core import Gso, filter_from_coeffs, horner, vandermonde
from .solvers import fista, prox_l1, prox_matrix, prox_rows, prox_sum

logger = logging.getLogger(__name__)

VANDERMONDE_COND_WARN = 1e12
SUPPORT_THRESHOLD = 1e-3


class ObservationKind(str, Enum):
    THETA = "Theta"
    XI = "Xi"
    PHI_LIFTED = "PhiLifted"
    PHI_SELECTION = "PhiSelection"
    THETA_BAR = "ThetaBarSpaceShift"


@dataclass
class ObservationMatrix:
    kind: ObservationKind
    matrix: np.ndarray
    nodes: Tuple[int, ...]
    coeffs: Optional[np.ndarray] = None
    lifted_order: Optional[int] = None
    condition: float = 1.0
    diffusion: Optional[np.ndarray] = None

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]


@dataclass
class AggregationState:
    Z: np.ndarray
    node: int
    sample_indices: np.ndarray
    z_Q: np.ndarray

    @property
    def selection(self) -> np.ndarray:
        return selection_matrix(self.sample_indices, self.Z.shape[1])


@dataclass
class SeedEstimate:
    s_hat: np.ndarray
    support: np.ndarray
    h_hat: Optional[np.ndarray] = None
    x_hat: Optional[np.ndarray] = None
    scaling_note: bool = False
    flags: dict = field(default_factory=dict)


def check_indices(indices: Sequence[int], n: int) -> np.ndarray:
    idx = np.asarray(indices, dtype=int).ravel()
    if np.unique(idx).size != idx.size:
        raise InvalidSelection(f"duplicate sample indices in {idx.tolist()}")
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise InvalidSelection(f"sample indices must lie in [0, {n})")
    return idx


def check_node(node_i: int, n: int) -> int:
    if not 0 <= node_i < n:
        raise InvalidSelection(f"node {node_i} outside [0, {n})")
    return int(node_i)


def selection_matrix(indices: Sequence[int], n: int) -> np.ndarray:
    """Pi_Q: one canonical row vector per kept index."""
    idx = check_indices(indices, n)
    return np.eye(n)[idx]


def _realify(M: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(M) and np.allclose(M.imag, 0, atol=1e-10 * max(np.abs(M).max(initial=0.0), 1.0)):
        return M.real
    return M


def build_aggregation(gso: Gso, x, node_i: int, sample_indices: Sequence[int]) -> AggregationState:
    n = gso.n_nodes
    x = np.asarray(x, dtype=float).ravel()
    if x.size != n:
        raise DimensionMismatch(f"signal length {x.size} vs N={n}")
    check_node(node_i, n)
    idx = check_indices(sample_indices, n)
    Z = np.empty((n, n))
    Z[:, 0] = x
    for r in range(1, n):
        Z[:, r] = gso.matrix @ Z[:, r - 1]
    return AggregationState(Z=Z, node=node_i, sample_indices=idx, z_Q=Z[node_i, idx].copy())


def _observation(gso: Gso, node_i: int, weights: Optional[np.ndarray], n_shifts: Optional[int]):
    n = gso.n_nodes
    check_node(node_i, n)
    psi = gso.vandermonde(n if n_shifts is None else n_shifts)
    v_i = gso.eigenvectors[node_i, :]
    if weights is not None:
        v_i = v_i * weights
    theta = _realify((psi.T * v_i) @ gso.inverse_eigenvectors)
    cond = float(np.linalg.cond(psi)) if psi.size else 1.0
    if cond > VANDERMONDE_COND_WARN:
        warnings.warn(f"Vandermonde condition number {cond:.3g}", IllConditionedWarning, stacklevel=3)
    return theta, cond


def observation_theta(gso: Gso, node_i: int, n_shifts: Optional[int] = None) -> ObservationMatrix:
    """Theta_i = Psi^T diag(v_i) U, mapping a seed vector to z_i."""
    matrix, cond = _observation(gso, node_i, None, n_shifts)
    return ObservationMatrix(ObservationKind.THETA, matrix, (node_i,), condition=cond)


def observation_xi(gso: Gso, node_i: int, coeffs: Sequence[float], n_shifts: Optional[int] = None) -> ObservationMatrix:
    """Xi_i = Psi^T diag(v_i * h_freq) U for seeds diffused by the filter ``coeffs``."""
    h = np.asarray(coeffs, dtype=float)
    h_freq = vandermonde(gso.eigenvalues, h.size) @ h
    matrix, cond = _observation(gso, node_i, h_freq, n_shifts)
    return ObservationMatrix(
        ObservationKind.XI,
        matrix,
        (node_i,),
        coeffs=h,
        condition=cond,
        diffusion=filter_from_coeffs(h, gso.matrix),
    )


def _lifting(gso: Gso, order: int) -> np.ndarray:
    # (Psi_R^T kr U^T)^T: N x (R N), acting on vec(s h^T) in column-major order
    psi_r = vandermonde(gso.eigenvalues, order)
    return scipy.linalg.khatri_rao(psi_r.T, gso.inverse_eigenvectors.T).T


def observation_phi(gso: Gso, node_i: int, order: int, n_shifts: Optional[int] = None) -> ObservationMatrix:
    """Phi_i = Psi^T diag(v_i) (Psi_R^T kr U^T)^T, so z_i = Phi_i vec(s h^T)."""
    if order < 1:
        raise InvalidParams("filter order must be >= 1")
    n = gso.n_nodes
    check_node(node_i, n)
    psi = gso.vandermonde(n if n_shifts is None else n_shifts)
    v_i = gso.eigenvectors[node_i, :]
    matrix = _realify((psi.T * v_i) @ _lifting(gso, order))
    return ObservationMatrix(
        ObservationKind.PHI_LIFTED, matrix, (node_i,), lifted_order=order, condition=float(np.linalg.cond(psi))
    )


def observation_phi_selection(gso: Gso, order: int) -> ObservationMatrix:
    """Lifted map for plain node sampling: x = V (Psi_R^T kr U^T)^T vec(s h^T)."""
    matrix = _realify(gso.eigenvectors @ _lifting(gso, order))
    return ObservationMatrix(ObservationKind.PHI_SELECTION, matrix, tuple(range(gso.n_nodes)), lifted_order=order)


# ---------------------------------------------------------------------------
# known-support recovery and sampling design
# ---------------------------------------------------------------------------


def _whitener(noise_cov: Optional[np.ndarray], rows: np.ndarray) -> np.ndarray:
    if noise_cov is None:
        return np.eye(rows.size)
    noise_cov = np.asarray(noise_cov, dtype=float)
    sub = noise_cov[np.ix_(rows, rows)]
    eigvals, eigvecs = scipy.linalg.eigh(sub)
    if eigvals.size and eigvals.min() <= 1e-14 * max(eigvals.max(), 1e-300):
        raise SingularNoiseCov("sampled noise covariance is not positive definite")
    return (eigvecs / np.sqrt(eigvals)) @ eigvecs.T


def _pinv(M: np.ndarray) -> np.ndarray:
    return np.linalg.pinv(M, rcond=max(M.shape, default=1) * np.finfo(float).eps)


def _support(support: Sequence[int], n: int) -> np.ndarray:
    return check_indices(support, n)


def recover_known_support(
    obs: ObservationMatrix,
    z_Q,
    sample_indices: Sequence[int],
    support: Sequence[int],
    noise_cov: Optional[np.ndarray] = None,
) -> SeedEstimate:
    """Best linear unbiased estimate of the seed values on a known support."""
    n_unknowns = obs.matrix.shape[1]
    rows = check_indices(sample_indices, obs.n_rows)
    supp = _support(support, n_unknowns)
    z_Q = np.asarray(z_Q, dtype=float).ravel()
    if z_Q.size != rows.size:
        raise DimensionMismatch(f"{z_Q.size} samples for {rows.size} indices")
    if rows.size < supp.size:
        raise InvalidParams(f"need Q >= |support| ({rows.size} < {supp.size})")
    W = _whitener(noise_cov, rows)
    M = W @ obs.matrix[np.ix_(rows, supp)]
    rank = np.linalg.matrix_rank(M) if M.size else 0
    flags = {"rank_deficient": bool(rank < supp.size)}
    if flags["rank_deficient"]:
        warnings.warn(f"observation submatrix rank {rank} < {supp.size}", RankDeficientWarning, stacklevel=2)
    s_hat = np.zeros(n_unknowns)
    s_hat[supp] = _pinv(M) @ (W @ z_Q)
    x_hat = obs.diffusion @ s_hat if obs.diffusion is not None else s_hat.copy()
    return SeedEstimate(s_hat=s_hat, support=supp, x_hat=x_hat, flags=flags)


def error_covariance(
    obs: ObservationMatrix,
    support: Sequence[int],
    sample_indices: Sequence[int],
    noise_cov: Optional[np.ndarray] = None,
) -> np.ndarray:
    """R_e = (M_Q^T M_Q)^+ for the whitened observation submatrix M_Q."""
    rows = check_indices(sample_indices, obs.n_rows)
    supp = _support(support, obs.matrix.shape[1])
    M = _whitener(noise_cov, rows) @ obs.matrix[np.ix_(rows, supp)]
    R_e = _pinv(M.T @ M)
    return 0.5 * (R_e + R_e.T)


def design_criterion(
    obs: ObservationMatrix,
    support: Sequence[int],
    sample_indices: Sequence[int],
    noise_cov: Optional[np.ndarray] = None,
    criterion: str = "MSE",
) -> float:
    """
    Scalar design cost of a sampling set. A tiny ridge keeps rank-deficient
    partial sets finite (and very expensive) during greedy growth.
    """
    rows = np.asarray(sample_indices, dtype=int)
    supp = np.asarray(support, dtype=int)
    M = _whitener(noise_cov, rows) @ obs.matrix[np.ix_(rows, supp)]
    full = obs.matrix[:, supp]
    ridge = 1e-10 * max(np.linalg.norm(full) ** 2 / max(supp.size, 1), 1e-300)
    gram = M.T @ M + ridge * np.eye(supp.size)
    eigvals = np.clip(scipy.linalg.eigvalsh(gram), ridge, None)
    if criterion == "MSE":
        return float(np.sum(1.0 / eigvals))
    if criterion == "SpectralNorm":
        return float(1.0 / eigvals.min())
    if criterion == "LogDet":
        return float(-np.sum(np.log(eigvals)))
    raise InvalidParams(f"unknown design criterion {criterion!r}")


def greedy_sampling_design(
    obs: ObservationMatrix,
    support: Sequence[int],
    noise_cov: Optional[np.ndarray],
    n_samples: int,
    criterion: str = "MSE",
) -> np.ndarray:
    """Grow the sampling set one index at a time, lowest index winning ties."""
    supp = _support(support, obs.matrix.shape[1])
    n_candidates = obs.n_rows
    if not supp.size <= n_samples <= n_candidates:
        raise InvalidParams(f"need |support| <= Q <= {n_candidates}, got Q={n_samples}")
    selected: List[int] = []
    for _ in range(n_samples):
        best_idx, best_val = -1, np.inf
        for cand in range(n_candidates):
            if cand in selected:
                continue
            val = design_criterion(obs, supp, selected + [cand], noise_cov, criterion)
            if val < best_val * (1 - 1e-12) or best_idx < 0:
                best_idx, best_val = cand, val
        selected.append(best_idx)
    chosen = np.asarray(selected)
    M = obs.matrix[np.ix_(chosen, supp)]
    if np.linalg.matrix_rank(M) < supp.size:
        raise InfeasibleStart(f"no {n_samples}-sample set gives a full-rank observation")
    logger.debug("Greedy %s design picked %s", criterion, chosen.tolist())
    return chosen


def exhaustive_sampling_design(
    obs: ObservationMatrix,
    support: Sequence[int],
    noise_cov: Optional[np.ndarray],
    n_samples: int,
    criterion: str = "MSE",
) -> Tuple[np.ndarray, float]:
    """Brute-force optimum over all Q-subsets (small problems only)."""
    supp = _support(support, obs.matrix.shape[1])
    best, best_val = None, np.inf
    for subset in itertools.combinations(range(obs.n_rows), n_samples):
        val = design_criterion(obs, supp, subset, noise_cov, criterion)
        if val < best_val:
            best, best_val = np.asarray(subset), val
    return best, best_val


# ---------------------------------------------------------------------------
# blind recovery
# ---------------------------------------------------------------------------


def _threshold_support(s_hat: np.ndarray) -> np.ndarray:
    peak = np.abs(s_hat).max(initial=0.0)
    if peak == 0:
        return np.zeros(0, dtype=int)
    return np.flatnonzero(np.abs(s_hat) > SUPPORT_THRESHOLD * peak)


def blind_sparse_recovery(
    obs: ObservationMatrix,
    y_Q,
    sample_indices: Sequence[int],
    noise_cov: Optional[np.ndarray] = None,
    gamma: float = 1e-3,
    exact: bool = False,
    debias: bool = False,
    max_iter: int = 5000,
    tol: float = 1e-8,
) -> SeedEstimate:
    """
    Sparse seeds from samples with unknown support:
    ``min ||W(y - A s)||^2 + gamma ||s||_1`` by accelerated proximal gradient,
    or with ``exact=True`` the noiseless program ``min ||s||_1 s.t. A s = y``
    as a linear program.
    """
    if gamma <= 0 and not exact:
        raise InvalidParams("gamma must be > 0")
    rows = check_indices(sample_indices, obs.n_rows)
    y_Q = np.asarray(y_Q, dtype=float).ravel()
    if y_Q.size != rows.size:
        raise DimensionMismatch(f"{y_Q.size} samples for {rows.size} indices")
    W = _whitener(noise_cov, rows)
    A = W @ obs.matrix[rows]
    b = W @ y_Q
    n = A.shape[1]

    if exact:
        res = scipy.optimize.linprog(
            c=np.ones(2 * n),
            A_eq=np.hstack([A, -A]),
            b_eq=b,
            bounds=[(0, None)] * (2 * n),
            method="highs",
        )
        if res.status != 0:
            raise InfeasibleProblem(f"basis pursuit failed: {res.message}")
        s_hat = res.x[:n] - res.x[n:]
    else:
        lipschitz = 2 * np.linalg.norm(A, 2) ** 2
        s_hat = fista(
            f=lambda s: float(np.sum((b - A @ s) ** 2)),
            grad_f=lambda s: 2 * A.T @ (A @ s - b),
            g=lambda s: gamma * float(np.abs(s).sum()),
            prox_g=lambda v, t: prox_l1(v, gamma * t),
            x0=np.zeros(n),
            step=1.0 / max(lipschitz, 1e-300),
            max_iter=max_iter,
            tol=tol,
        )

    supp = _threshold_support(s_hat)
    cleaned = np.zeros(n)
    cleaned[supp] = s_hat[supp]
    if debias and 0 < supp.size <= rows.size:
        cleaned[supp] = _pinv(A[:, supp]) @ b
    x_hat = obs.diffusion @ cleaned if obs.diffusion is not None else cleaned.copy()
    return SeedEstimate(s_hat=cleaned, support=supp, x_hat=x_hat)


def blind_deconvolution(
    obs_phi: ObservationMatrix,
    z_Q,
    sample_indices: Sequence[int],
    gamma1: float = 1e-2,
    gamma2: float = 1e-2,
    init: Optional[np.ndarray] = None,
    max_iter: int = 5000,
    tol: float = 1e-9,
    raise_on_cap: bool = True,
) -> SeedEstimate:
    """
    Jointly estimate seeds ``s`` and filter taps ``h`` through the lifted
    variable ``Sigma = s h^T``: proximal gradient on
    ``0.5 ||z - Phi vec(Sigma)||^2 + gamma1 ||Sigma||_* + gamma2 ||Sigma||_{2,1}``
    (row groups). The prox of the two penalties together is computed with
    ``prox_sum``. Scale is fixed by ``||h|| = 1`` with the first nonzero tap
    positive.

    Hitting ``max_iter`` raises ``NonConvergence`` unless ``raise_on_cap`` is
    False, in which case the last iterate is returned with
    ``flags["converged"] = False``.
    """
    order = obs_phi.lifted_order
    if order is None:
        raise InvalidParams("blind deconvolution needs a lifted observation matrix")
    rows = check_indices(sample_indices, obs_phi.n_rows)
    z_Q = np.asarray(z_Q, dtype=float).ravel()
    A = obs_phi.matrix[rows]
    n = A.shape[1] // order
    step = 1.0 / max(np.linalg.norm(A, 2) ** 2, 1e-300)
    sigma = np.zeros((n, order)) if init is None else np.array(init, dtype=float)
    if sigma.shape != (n, order):
        raise DimensionMismatch(f"init must be {(n, order)}, got {sigma.shape}")

    converged = False
    for itr in range(max_iter):
        residual = A @ sigma.flatten(order="F") - z_Q
        grad = (A.T @ residual).reshape((n, order), order="F")
        candidate = prox_sum(
            sigma - step * grad,
            lambda x: prox_rows(x, step * gamma2),
            lambda x: prox_matrix(x, step * gamma1),
        )
        change = np.linalg.norm(candidate - sigma)
        sigma = candidate
        if change <= tol * max(np.linalg.norm(sigma), 1e-12):
            converged = True
            break
    if not converged:
        if raise_on_cap:
            raise NonConvergence(f"blind deconvolution did not converge in {max_iter} iterations")
        logger.warning("blind deconvolution stopped at the %d-iteration cap", max_iter)

    U, sv, Vt = np.linalg.svd(sigma, full_matrices=False)
    flags = {"converged": converged}
    if sv.size == 0 or sv[0] == 0:
        s_hat, h_hat = np.zeros(n), np.zeros(order)
        flags["degenerate"] = True
    else:
        s_hat = sv[0] * U[:, 0]
        h_hat = Vt[0].copy()
        lead = np.flatnonzero(np.abs(h_hat) > 1e-12)
        if lead.size and h_hat[lead[0]] < 0:
            s_hat, h_hat = -s_hat, -h_hat
        flags["degenerate"] = bool(sv.size > 1 and sv[0] < 3 * sv[1])
    if flags["degenerate"]:
        warnings.warn("ambiguous rank-one extraction", DegenerateSolutionWarning, stacklevel=2)
    supp = _threshold_support(s_hat)
    cleaned = np.zeros(n)
    cleaned[supp] = s_hat[supp]
    flags["underdetermined"] = bool(rows.size < order + supp.size)
    return SeedEstimate(s_hat=cleaned, support=supp, h_hat=h_hat, scaling_note=True, flags=flags)


# ---------------------------------------------------------------------------
# multi-node and bandlimited variants
# ---------------------------------------------------------------------------


def space_shift_assemble(
    gso: Gso,
    coeffs: Optional[Sequence[float]],
    nodes: Sequence[int],
    per_node_indices: Sequence[Sequence[int]],
) -> Tuple[ObservationMatrix, np.ndarray]:
    """
    Stack the per-node observation matrices of several sampling nodes into
    Theta_bar and return it with the global row indices of the kept samples
    (node position ``p``, shift ``r`` maps to row ``p * N + r``).
    """
    if len(nodes) == 0:
        raise InvalidParams("space-shift sampling needs at least one node")
    if len(nodes) != len(per_node_indices):
        raise DimensionMismatch(f"{len(nodes)} nodes but {len(per_node_indices)} index lists")
    n = gso.n_nodes
    h = np.array([1.0]) if coeffs is None else np.asarray(coeffs, dtype=float)
    blocks = [observation_xi(gso, int(i), h) for i in nodes]
    rows = [pos * n + check_indices(idx, n) for pos, idx in enumerate(per_node_indices)]
    stacked = ObservationMatrix(
        ObservationKind.THETA_BAR,
        np.vstack([b.matrix for b in blocks]),
        tuple(int(i) for i in nodes),
        coeffs=h,
        condition=max(b.condition for b in blocks),
        diffusion=blocks[0].diffusion,
    )
    return stacked, np.concatenate(rows)


def selection_sampling_recover(gso: Gso, x_Q, sample_indices: Sequence[int], k: int) -> np.ndarray:
    """x_hat = V_K (Pi_Q V_K)^+ x_Q for a K-bandlimited signal."""
    rows = check_indices(sample_indices, gso.n_nodes)
    V_k = gso.leading(k)
    sub = V_k[rows]
    if rows.size < k or np.linalg.matrix_rank(sub) < k:
        raise RankDeficient(f"Pi_Q V_K has rank below K={k}")
    return np.real(V_k @ (_pinv(sub) @ np.asarray(x_Q, dtype=float).ravel()))


def aggregation_bandlimited_recover(gso: Gso, z_Q, node_i: int, sample_indices: Sequence[int], k: int) -> np.ndarray:
    """Bandlimited reconstruction from aggregation samples taken at a single node."""
    check_node(node_i, gso.n_nodes)
    rows = check_indices(sample_indices, gso.n_nodes)
    v_active = gso.eigenvectors[node_i, :k]
    if (np.abs(v_active) < 1e-12).any():
        raise FrequencyBlind(f"node {node_i} does not observe every active frequency")
    psi_t = gso.vandermonde(gso.n_nodes).T
    G = psi_t[np.ix_(rows, np.arange(k))] * v_active
    if rows.size < k or np.linalg.matrix_rank(G) < k:
        raise RankDeficient(f"aggregation system has rank below K={k}")
    x_freq = _pinv(G) @ np.asarray(z_Q, dtype=float).ravel()
    return np.real(gso.leading(k) @ x_freq)


# ---------------------------------------------------------------------------
# success accounting
# ---------------------------------------------------------------------------


def seed_recovered(s_true, estimate, radius: float = 0.1) -> bool:
    """Support identified exactly and the l2 error below ``radius``."""
    s_true = np.asarray(s_true, dtype=float).ravel()
    s_hat = estimate.s_hat if isinstance(estimate, SeedEstimate) else np.asarray(estimate, dtype=float).ravel()
    true_support = set(np.flatnonzero(s_true).tolist())
    found = set(_threshold_support(s_hat).tolist())
    return found == true_support and float(np.linalg.norm(s_true - s_hat)) < radius


def recovery_rate(trials: Iterable, success_predicate: Optional[Callable] = None) -> float:
    """Fraction of trials judged successful (trials are booleans when no predicate is given)."""
    outcomes = [bool(success_predicate(t)) if success_predicate else bool(t) for t in trials]
    if not outcomes:
        raise InvalidParams("recovery rate needs at least one trial")
    return sum(outcomes) / len(outcomes)


# named recovery set-ups: (observation, support known, greedy design, blind)
SCENARIOS = {
    "sparse-recovery": ("theta", True, False),
    "active-sampling": ("theta", True, True),
    "blind-sparse": ("theta", False, False),
    "diffused": ("xi", True, False),
    "diffused-active": ("xi", True, True),
    "blind-diffused": ("xi", False, False),
    "blind-deconvolution": ("phi", False, False),
}


def run_recovery_scenario(
    scenario: str,
    gso: Gso,
    seeds: np.ndarray,
    coeffs: Sequence[float],
    node_i: int,
    n_samples: int,
    noise_var: float = 0.0,
    seed=None,
    gamma: float = 1e-3,
) -> SeedEstimate:
    """Simulate aggregation samples at ``node_i`` and recover the seeds."""
    if scenario not in SCENARIOS:
        raise InvalidParams(f"unknown recovery scenario {scenario!r}")
    observation, known_support, active = SCENARIOS[scenario]
    rng = np.random.default_rng(seed)
    n = gso.n_nodes
    h = np.asarray(coeffs, dtype=float)
    support = np.flatnonzero(seeds)
    if observation == "theta":
        # no diffusion: the seeds are sampled directly
        h = np.array([1.0])
    x = horner(h, gso.matrix, np.asarray(seeds, dtype=float))
    state = build_aggregation(gso, x, node_i, np.arange(n))
    z_full = state.Z[node_i]
    noise_cov = noise_var * np.eye(n) if noise_var > 0 else None

    if observation == "phi":
        obs = observation_phi(gso, node_i, h.size)
    elif observation == "xi":
        obs = observation_xi(gso, node_i, h)
    else:
        obs = observation_theta(gso, node_i)

    if active:
        rows = greedy_sampling_design(obs, support, noise_cov, n_samples)
    else:
        rows = np.arange(n_samples)
    z_Q = z_full[rows]
    if noise_var > 0:
        z_Q = z_Q + np.sqrt(noise_var) * rng.standard_normal(rows.size)

    if observation == "phi":
        return blind_deconvolution(obs, z_Q, rows, gamma1=gamma, gamma2=gamma, raise_on_cap=False)
    if known_support:
        return recover_known_support(obs, z_Q, rows, support, noise_cov)
    return blind_sparse_recovery(obs, z_Q, rows, noise_cov, gamma=gamma, exact=noise_var == 0, debias=True)
