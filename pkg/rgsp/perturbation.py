"""Edge-perturbation models producing observed operators S_bar = S + Delta."""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DimensionMismatch, InfeasiblePerturbation, InvalidParams
from .graph_core import Gso, filter_from_coeffs

logger = logging.getLogger(__name__)

ZERO_TOL = 1e-9


class PerturbationMode(str, Enum):
    CREATE_DESTROY = "CreateDestroy"
    CREATE = "Create"
    DESTROY = "Destroy"
    RATIO_REWIRE = "RatioRewire"
    WEIGHT_NOISE = "WeightNoise"


class GraphDistanceKind(str, Enum):
    L0 = "L0"
    EDGE_WEIGHT_L2 = "EdgeWeightL2"
    L1 = "L1"


@dataclass(frozen=True)
class PerturbationSpec:
    """
    Edge-error model.

    ``p_create``/``p_destroy`` are per-entry Bernoulli probabilities for the
    CreateDestroy, Create and Destroy modes. RatioRewire flips exactly
    ``round(fraction * |E|)`` undirected entries, of which ``destroy_share``
    are destructions. WeightNoise adds N(0, sigma^2) to existing edge weights.
    """

    mode: PerturbationMode = PerturbationMode.CREATE_DESTROY
    p_create: float = 0.0
    p_destroy: float = 0.0
    fraction: float = 0.0
    destroy_share: float = 0.5
    sigma: float = 0.0
    weight_dist: str = "auto"

    def __post_init__(self):
        object.__setattr__(self, "mode", PerturbationMode(self.mode))
        for name in ("p_create", "p_destroy", "fraction", "destroy_share"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InvalidParams(f"{name}={value} must lie in [0, 1]")
        if self.sigma < 0:
            raise InvalidParams("sigma must be >= 0")
        if self.weight_dist not in ("auto", "unit", "empirical"):
            raise InvalidParams(f"unknown weight_dist {self.weight_dist!r}")

    @classmethod
    def create(cls, p: float) -> "PerturbationSpec":
        return cls(mode=PerturbationMode.CREATE, p_create=p)

    @classmethod
    def destroy(cls, p: float) -> "PerturbationSpec":
        return cls(mode=PerturbationMode.DESTROY, p_destroy=p)

    @classmethod
    def rewire(cls, fraction: float, destroy_share: float = 0.5) -> "PerturbationSpec":
        return cls(mode=PerturbationMode.RATIO_REWIRE, fraction=fraction, destroy_share=destroy_share)

    @classmethod
    def from_dict(cls, params: dict) -> "PerturbationSpec":
        try:
            return cls(**params)
        except (TypeError, ValueError) as exc:
            raise InvalidParams(str(exc)) from exc


def _is_unweighted(weights: np.ndarray) -> bool:
    return weights.size == 0 or np.allclose(weights, 1.0)


def perturb(gso: Gso, spec: PerturbationSpec, seed=None) -> Tuple[Gso, np.ndarray]:
    """
    Draw an observed operator S_bar = S + Delta under ``spec``.

    Flips are drawn on the strict upper triangle and mirrored. Only operators
    with a zero diagonal (adjacency-like) are supported.
    """
    S = np.asarray(gso.matrix)
    if not gso.kind.symmetric:
        raise InvalidParams("perturbation models require a symmetric shift operator")
    rng = np.random.default_rng(seed)
    n = gso.n_nodes
    iu = np.triu_indices(n, k=1)
    upper = S[iu]
    is_edge = np.abs(upper) > ZERO_TOL
    edge_weights = upper[is_edge]
    delta_upper = np.zeros_like(upper)

    def created_weights(count: int) -> np.ndarray:
        dist = spec.weight_dist
        if dist == "auto":
            dist = "unit" if _is_unweighted(edge_weights) else "empirical"
        if dist == "unit" or edge_weights.size == 0:
            return np.ones(count)
        return rng.choice(edge_weights, size=count, replace=True)

    mode = spec.mode
    if mode in (PerturbationMode.CREATE_DESTROY, PerturbationMode.CREATE, PerturbationMode.DESTROY):
        p_create = spec.p_create if mode is not PerturbationMode.DESTROY else 0.0
        p_destroy = spec.p_destroy if mode is not PerturbationMode.CREATE else 0.0
        draws = rng.random(upper.size)
        destroyed = is_edge & (draws < p_destroy)
        created = ~is_edge & (draws < p_create)
        delta_upper[destroyed] = -upper[destroyed]
        delta_upper[created] = created_weights(int(created.sum()))
    elif mode is PerturbationMode.RATIO_REWIRE:
        n_flips = int(round(spec.fraction * is_edge.sum()))
        n_destroy = int(round(spec.destroy_share * n_flips))
        n_create = n_flips - n_destroy
        edges = np.flatnonzero(is_edge)
        non_edges = np.flatnonzero(~is_edge)
        if n_destroy > edges.size or n_create > non_edges.size:
            raise InfeasiblePerturbation(
                f"asked for {n_destroy} destructions / {n_create} creations with "
                f"{edges.size} edges / {non_edges.size} non-edges"
            )
        destroyed = rng.choice(edges, size=n_destroy, replace=False)
        created = rng.choice(non_edges, size=n_create, replace=False)
        delta_upper[destroyed] = -upper[destroyed]
        delta_upper[created] = created_weights(n_create)
    elif mode is PerturbationMode.WEIGHT_NOISE:
        noisy = upper[is_edge] + spec.sigma * rng.standard_normal(int(is_edge.sum()))
        # weights stay nonnegative
        delta_upper[is_edge] = np.maximum(noisy, 0.0) - upper[is_edge]

    delta = np.zeros_like(S)
    delta[iu] = delta_upper
    delta = delta + delta.T
    s_bar = gso.with_matrix(S + delta)
    logger.debug("Perturbed %d undirected entries (%s)", int(np.count_nonzero(delta_upper)), mode.value)
    return s_bar, delta


def graph_distance(S1, S2, kind: Union[GraphDistanceKind, str] = GraphDistanceKind.L0) -> float:
    S1 = np.asarray(S1.matrix if isinstance(S1, Gso) else S1, dtype=float)
    S2 = np.asarray(S2.matrix if isinstance(S2, Gso) else S2, dtype=float)
    if S1.shape != S2.shape:
        raise DimensionMismatch(f"{S1.shape} vs {S2.shape}")
    kind = GraphDistanceKind(kind)
    diff = S1 - S2
    if kind is GraphDistanceKind.L0:
        return float(np.count_nonzero(np.abs(diff) > ZERO_TOL))
    if kind is GraphDistanceKind.L1:
        return float(np.abs(diff).sum())
    support = (np.abs(S1) > ZERO_TOL) | (np.abs(S2) > ZERO_TOL)
    return float((diff[support] ** 2).sum())


def filter_perturbation_bound(S, S_bar, coeffs: Sequence[float]) -> Tuple[float, float]:
    """
    Operator-norm error of a filter under a perturbed shift, and its
    first-order bound sum_{r>=1} |h_r| r C^{r-1} ||Delta||.
    """
    S = np.asarray(S.matrix if isinstance(S, Gso) else S, dtype=float)
    S_bar = np.asarray(S_bar.matrix if isinstance(S_bar, Gso) else S_bar, dtype=float)
    h = np.asarray(coeffs, dtype=float)
    lhs = float(np.linalg.norm(filter_from_coeffs(h, S_bar) - filter_from_coeffs(h, S), 2))
    c = max(np.linalg.norm(S, 2), np.linalg.norm(S_bar, 2))
    delta_norm = np.linalg.norm(S_bar - S, 2)
    r = np.arange(h.size)
    rhs = float(np.sum(np.abs(h[1:]) * r[1:] * c ** (r[1:] - 1)) * delta_norm)
    return lhs, rhs


def perturbation_from_config(params: Optional[dict]) -> Optional[PerturbationSpec]:
    if not params:
        return None
    return PerturbationSpec.from_dict(params)
