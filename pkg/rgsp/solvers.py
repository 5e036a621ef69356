"""
Shared numerical building blocks: proximal operators, projections onto the
adjacency set, a proximal-gradient driver and the solver report type.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from .errors import NonConvergence

logger = logging.getLogger(__name__)


@dataclass
class SolverReport:
    """Per-iteration trace of an iterative solve."""

    objective: List[float] = field(default_factory=list)
    residuals: Dict[str, List[float]] = field(default_factory=dict)
    iterations: int = 0
    converged: bool = False
    flags: Dict[str, bool] = field(default_factory=dict)
    seconds: float = 0.0
    extra: Dict[str, object] = field(default_factory=dict)

    def record(self, name: str, value: float) -> None:
        self.residuals.setdefault(name, []).append(float(value))

    def to_frame(self) -> pd.DataFrame:
        """One row per recorded iteration; ragged traces are padded with NaN."""
        columns = {"objective": self.objective, **self.residuals}
        n_rows = max((len(v) for v in columns.values()), default=0)
        padded = {
            name: list(values) + [np.nan] * (n_rows - len(values))
            for name, values in columns.items()
        }
        frame = pd.DataFrame(padded)
        frame.insert(0, "iter", np.arange(n_rows))
        return frame


class Stopwatch:
    def __init__(self):
        self._start = time.perf_counter()

    @property
    def elapsed(self) -> float:
        return time.perf_counter() - self._start


# ---------------------------------------------------------------------------
# proximal operators
# ---------------------------------------------------------------------------


def prox_l1(v: np.ndarray, lamb) -> np.ndarray:
    # soft thresholding; lamb may be an array of per-entry weights
    return np.maximum(0, v - lamb) - np.maximum(0, -v - lamb)


def prox_matrix(v: np.ndarray, lamb: float, prox_f: Callable = prox_l1) -> np.ndarray:
    """
    Proximal operator of an orthogonally invariant matrix function evaluated
    through its singular values. With ``prox_f = prox_l1`` this is singular
    value thresholding, the prox of the nuclear norm.
    """
    _U, _s, _Vt = np.linalg.svd(v, full_matrices=False)
    return (_U * prox_f(_s, lamb)) @ _Vt


def prox_columns(v: np.ndarray, lamb: float) -> np.ndarray:
    """Prox of ``lamb * sum_j ||v[:, j]||_2`` (column-wise group shrinkage)."""
    norms = np.linalg.norm(v, axis=0)
    scale = np.where(norms > lamb, 1.0 - lamb / np.maximum(norms, 1e-300), 0.0)
    return v * scale


def prox_rows(v: np.ndarray, lamb: float) -> np.ndarray:
    return prox_columns(v.T, lamb).T


def prox_pairwise_l1(a: np.ndarray, b: np.ndarray, lamb: float):
    """Prox of ``lamb * ||a - b||_1`` jointly in (a, b)."""
    mean = 0.5 * (a + b)
    diff = prox_l1(a - b, 2.0 * lamb)
    return mean + 0.5 * diff, mean - 0.5 * diff


def prox_sum(
    v: np.ndarray,
    prox_a: Callable[[np.ndarray], np.ndarray],
    prox_b: Callable[[np.ndarray], np.ndarray],
    max_iter: int = 200,
    tol: float = 1e-12,
) -> np.ndarray:
    """
    Prox of ``a + b`` at ``v`` from the two individual prox maps, by the
    Dykstra-like proximal iteration (the prox analogue of Dykstra's
    alternating projections).
    """
    x = np.asarray(v, dtype=float).copy()
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    for _ in range(max_iter):
        y = prox_a(x + p)
        p = x + p - y
        x_new = prox_b(y + q)
        q = y + q - x_new
        change = np.linalg.norm(x_new - x)
        x = x_new
        if change <= tol * max(np.linalg.norm(x), 1.0):
            break
    return x


def nuclear_norm(v: np.ndarray) -> float:
    return float(np.linalg.svd(v, compute_uv=False).sum())


def l21_norm(v: np.ndarray) -> float:
    """Sum of column l2 norms."""
    return float(np.linalg.norm(v, axis=0).sum())


# ---------------------------------------------------------------------------
# projections
# ---------------------------------------------------------------------------


def project_symmetric_hollow_nonneg(v: np.ndarray) -> np.ndarray:
    """Exact projection onto symmetric, nonnegative, zero-diagonal matrices."""
    out = np.maximum(0.5 * (v + v.T), 0.0)
    np.fill_diagonal(out, 0.0)
    return out


def project_row_sums(v: np.ndarray, lower: float = 1.0) -> np.ndarray:
    """Exact projection onto ``{X : off-diagonal row sums >= lower}``, diagonal left as is."""
    n = v.shape[0]
    if n < 2:
        return v.copy()
    off = v.sum(axis=1) - np.diag(v)
    deficit = np.maximum(lower - off, 0.0) / (n - 1)
    out = v + deficit[:, None]
    out[np.diag_indices(n)] -= deficit
    return out


def project_adjacency_set(
    v: np.ndarray, max_iter: int = 1000, tol: float = 1e-11, lower: float = 1.0
) -> np.ndarray:
    """
    Projection onto S_A = {symmetric, nonnegative, zero diagonal, A1 >= lower}
    by Dykstra's alternating projections.

    If Dykstra stops at ``max_iter`` with a row still short of ``lower``, the
    result is only a feasible approximation of the projection: the iterate is
    rescaled globally (or a uniform complete graph is added when a row is
    empty), which puts it in S_A but not at the nearest point.
    """
    x = project_symmetric_hollow_nonneg(v)
    if v.shape[0] < 2 or (x.sum(axis=1) >= lower).all():
        return x
    y = v.astype(float).copy()
    p = np.zeros_like(y)
    q = np.zeros_like(y)
    for _ in range(max_iter):
        x = project_symmetric_hollow_nonneg(y + p)
        p = y + p - x
        y_new = project_row_sums(x + q, lower)
        q = x + q - y_new
        change = np.linalg.norm(y_new - y)
        y = y_new
        if change <= tol * max(1.0, np.linalg.norm(y)) and (x.sum(axis=1) >= lower - tol).all():
            break
    x = project_symmetric_hollow_nonneg(y)
    shortest = x.sum(axis=1).min()
    if shortest < lower:
        logger.debug("Dykstra left a row sum of %.3g below %.3g; rescaling", shortest, lower)
        if shortest <= 0:
            # an all-zero row: fall back to a uniform complete graph on that scale
            x = x + lower / (x.shape[0] - 1) * (1.0 - np.eye(x.shape[0]))
        else:
            x = x * (lower / shortest)
    return x


# ---------------------------------------------------------------------------
# iterative helpers
# ---------------------------------------------------------------------------


def power_iteration(
    matvec: Callable[[np.ndarray], np.ndarray],
    dim: int,
    n_iter: int = 100,
    tol: float = 1e-8,
    seed: int = 0,
) -> float:
    """Largest eigenvalue magnitude of a symmetric PSD linear map."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(dim)
    x /= np.linalg.norm(x)
    estimate = 0.0
    for _ in range(n_iter):
        y = matvec(x)
        norm = np.linalg.norm(y)
        if norm == 0:
            return 0.0
        new_estimate = float(x @ y)
        x = y / norm
        if abs(new_estimate - estimate) <= tol * max(abs(new_estimate), 1e-300):
            estimate = new_estimate
            break
        estimate = new_estimate
    return max(estimate, float(np.linalg.norm(matvec(x))))


def fista(
    f: Callable[[np.ndarray], float],
    grad_f: Callable[[np.ndarray], np.ndarray],
    g: Callable[[np.ndarray], float],
    prox_g: Callable[[np.ndarray, float], np.ndarray],
    x0: np.ndarray,
    step: float = 1.0,
    max_iter: int = 5000,
    tol: float = 1e-8,
    backtrack: float = 0.5,
    raise_on_cap: bool = True,
    report: Optional[SolverReport] = None,
) -> np.ndarray:
    """
    Accelerated proximal gradient for ``f(x) + g(x)`` with backtracking line
    search on the smooth part. Stops on relative objective change below ``tol``.
    """
    x = x0.astype(float).copy()
    y = x.copy()
    t_step = 1.0
    objective = f(x) + g(x)
    for itr in range(max_iter):
        grad = grad_f(y)
        fy = f(y)
        while True:
            x_new = prox_g(y - step * grad, step)
            diff = x_new - y
            if f(x_new) <= fy + np.vdot(grad, diff).real + np.vdot(diff, diff).real / (2 * step) + 1e-15:
                break
            step *= backtrack
        new_objective = f(x_new) + g(x_new)
        if new_objective > objective:
            # monotone restart
            t_step = 1.0
            y = x.copy()
            if np.allclose(x_new, x):
                break
            x_new = prox_g(x - step * grad_f(x), step)
            new_objective = f(x_new) + g(x_new)
        t_prev = t_step
        t_step = (1 + np.sqrt(1 + 4 * t_prev**2)) / 2
        y = x_new + (t_prev - 1) / t_step * (x_new - x)
        change = abs(objective - new_objective)
        x, objective = x_new, new_objective
        if report is not None:
            report.objective.append(objective)
            report.iterations = itr + 1
        if change <= tol * max(abs(objective), 1e-12):
            if report is not None:
                report.converged = True
            return x
    if raise_on_cap:
        raise NonConvergence(f"proximal gradient did not converge in {max_iter} iterations")
    logger.warning("proximal gradient hit the %d-iteration cap", max_iter)
    return x
