"""
Graph shift operators, graph filters, the graph Fourier transform, signal
generators and the non-robust baselines the other modules build on.
"""

import logging
import threading
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatch,
    InvalidParams,
    InvalidStructure,
    NonDiagonalizable,
    RankDeficientWarning,
    ZeroReference,
)

logger = logging.getLogger(__name__)

EIGVEC_COND_LIMIT = 1e8


class GsoKind(str, Enum):
    ADJACENCY = "Adjacency"
    LAPLACIAN = "CombinatorialLaplacian"
    SYMMETRIC = "GenericSymmetric"
    DIAGONALIZABLE = "GenericDiagonalizable"

    @property
    def symmetric(self) -> bool:
        return self is not GsoKind.DIAGONALIZABLE


class Gso:
    """
    Dense graph shift operator with a lazily computed, cached spectrum.

    For symmetric kinds the eigenvalues are sorted in descending order, so the
    ``K`` leading eigenvectors are ``eigenvectors[:, :K]``. Instances are
    immutable: the stored matrix is marked read-only.
    """

    def __init__(
        self,
        matrix: np.ndarray,
        kind: Union[GsoKind, str] = GsoKind.ADJACENCY,
        edge_list: Optional[Iterable[Tuple[int, int]]] = None,
        node_labels: Optional[np.ndarray] = None,
        validate: bool = True,
    ):
        matrix = np.array(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DimensionMismatch(f"shift operator must be square, got {matrix.shape}")
        matrix.setflags(write=False)
        self._matrix = matrix
        self.kind = GsoKind(kind)
        self.node_labels = None if node_labels is None else np.asarray(node_labels)
        self._lock = threading.Lock()
        self._spectrum: Optional[Tuple[np.ndarray, np.ndarray, np.ndarray]] = None
        if validate:
            _validate_kind(matrix, self.kind)
            if edge_list is not None:
                _validate_support(matrix, edge_list, self.kind.symmetric)

    def __repr__(self) -> str:
        return f"Gso(n_nodes={self.n_nodes}, kind={self.kind.value})"

    def __getstate__(self):
        state = self.__dict__.copy()
        del state["_lock"]
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lock = threading.Lock()

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def n_nodes(self) -> int:
        return self._matrix.shape[0]

    @property
    def eigenvalues(self) -> np.ndarray:
        return self._spectral()[0]

    @property
    def eigenvectors(self) -> np.ndarray:
        """V with columns the eigenvectors."""
        return self._spectral()[1]

    @property
    def inverse_eigenvectors(self) -> np.ndarray:
        """U = V^{-1} (equal to V^T for symmetric kinds)."""
        return self._spectral()[2]

    def leading(self, k: int) -> np.ndarray:
        if not 0 <= k <= self.n_nodes:
            raise InvalidParams(f"bandwidth K={k} outside [0, {self.n_nodes}]")
        return self.eigenvectors[:, :k]

    def vandermonde(self, order: Optional[int] = None) -> np.ndarray:
        return vandermonde(self.eigenvalues, self.n_nodes if order is None else order)

    def spectral_norm(self) -> float:
        if self.kind.symmetric:
            return float(np.abs(self.eigenvalues).max()) if self.n_nodes else 0.0
        return float(np.linalg.norm(self._matrix, 2))

    def with_matrix(self, matrix: np.ndarray, validate: bool = True) -> "Gso":
        return Gso(matrix, self.kind, node_labels=self.node_labels, validate=validate)

    def _spectral(self):
        # once-only initialization; readers after the first see the cached tuple
        if self._spectrum is None:
            with self._lock:
                if self._spectrum is None:
                    self._spectrum = _eigendecompose(self._matrix, self.kind)
        return self._spectrum


def _eigendecompose(matrix: np.ndarray, kind: GsoKind):
    if kind.symmetric:
        eigvals, eigvecs = scipy.linalg.eigh(matrix)
        order = np.argsort(-eigvals, kind="stable")
        eigvals, eigvecs = eigvals[order], eigvecs[:, order]
        recon = (eigvecs * eigvals) @ eigvecs.T
        scale = max(np.linalg.norm(matrix), 1e-300)
        if np.linalg.norm(matrix - recon) > 1e-10 * scale:
            logger.warning("spectral reconstruction error above 1e-10 relative")
        for arr in (eigvals, eigvecs):
            arr.setflags(write=False)
        inverse = eigvecs.T
        return eigvals, eigvecs, inverse
    eigvals, eigvecs = scipy.linalg.eig(matrix)
    order = np.lexsort((-eigvals.imag, -eigvals.real))
    eigvals, eigvecs = eigvals[order], eigvecs[:, order]
    cond = np.linalg.cond(eigvecs)
    if not np.isfinite(cond) or cond > EIGVEC_COND_LIMIT:
        raise NonDiagonalizable(f"eigenvector matrix condition number {cond:.3g}")
    if np.allclose(eigvals.imag, 0) and np.allclose(eigvecs.imag, 0):
        eigvals, eigvecs = eigvals.real, eigvecs.real
    inverse = np.linalg.inv(eigvecs)
    return eigvals, eigvecs, inverse


def _validate_kind(matrix: np.ndarray, kind: GsoKind) -> None:
    scale = max(np.abs(matrix).max(initial=0.0), 1.0)
    tol = 1e-12 * scale
    if kind.symmetric and not np.allclose(matrix, matrix.T, atol=tol, rtol=0):
        raise InvalidStructure(f"{kind.value} shift operator must be symmetric")
    off_diag = matrix[~np.eye(matrix.shape[0], dtype=bool)]
    if kind is GsoKind.ADJACENCY:
        if (matrix < -tol).any():
            raise InvalidStructure("adjacency entries must be nonnegative")
        if np.abs(np.diag(matrix)).max(initial=0.0) > tol:
            raise InvalidStructure("adjacency diagonal must be zero")
    elif kind is GsoKind.LAPLACIAN:
        if (off_diag > tol).any():
            raise InvalidStructure("Laplacian off-diagonal entries must be nonpositive")
        if np.abs(matrix.sum(axis=1)).max(initial=0.0) > 1e-9 * scale:
            raise InvalidStructure("Laplacian rows must sum to zero")


def _validate_support(matrix: np.ndarray, edge_list, symmetric: bool) -> None:
    allowed = np.eye(matrix.shape[0], dtype=bool)
    for i, j in edge_list:
        allowed[i, j] = True
        if symmetric:
            allowed[j, i] = True
    if (np.abs(matrix[~allowed]) > 0).any():
        raise InvalidStructure("shift operator has nonzeros outside the edge set")


def vandermonde(eigenvalues: np.ndarray, order: int) -> np.ndarray:
    """Psi with Psi[i, j] = lambda_i ** j, j = 0..order-1."""
    return np.vander(np.asarray(eigenvalues), N=order, increasing=True)


def laplacian(adjacency: np.ndarray) -> np.ndarray:
    adjacency = np.asarray(adjacency, dtype=float)
    weights = np.abs(adjacency - np.diag(np.diag(adjacency)))
    return np.diag(weights.sum(axis=1)) - weights


def build_gso(
    edge_list: Sequence[Tuple[int, int]],
    weights: Optional[Sequence[float]] = None,
    kind: Union[GsoKind, str] = GsoKind.ADJACENCY,
    n_nodes: Optional[int] = None,
) -> Gso:
    """Assemble a dense shift operator from an edge list."""
    kind = GsoKind(kind)
    edges = [(int(i), int(j)) for i, j in edge_list]
    if weights is None:
        weights = [1.0] * len(edges)
    if len(weights) != len(edges):
        raise DimensionMismatch(f"{len(edges)} edges but {len(weights)} weights")
    if n_nodes is None:
        n_nodes = 1 + max((max(e) for e in edges), default=-1)
    adjacency = np.zeros((n_nodes, n_nodes))
    seen = set()
    for (i, j), w in zip(edges, weights):
        if not (0 <= i < n_nodes and 0 <= j < n_nodes):
            raise InvalidStructure(f"edge ({i}, {j}) outside [0, {n_nodes})")
        if i == j and kind in (GsoKind.ADJACENCY, GsoKind.LAPLACIAN):
            raise InvalidStructure(f"self-loop at node {i} not allowed for {kind.value}")
        key = (min(i, j), max(i, j)) if kind.symmetric else (i, j)
        if key in seen:
            raise InvalidStructure(f"duplicate edge {key}")
        seen.add(key)
        adjacency[i, j] = w
        if kind.symmetric:
            adjacency[j, i] = w
    matrix = laplacian(adjacency) if kind is GsoKind.LAPLACIAN else adjacency
    return Gso(matrix, kind, edge_list=edges)


def _check_probability(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise InvalidParams(f"{name}={value} must lie in [0, 1]")
    return value


def _require(params: Dict[str, Any], *names: str) -> List[Any]:
    missing = [n for n in names if n not in params]
    if missing:
        raise InvalidParams(f"missing graph parameters: {', '.join(missing)}")
    return [params[n] for n in names]


def _nx_seed(seed) -> int:
    return int(np.random.default_rng(seed).integers(2**32 - 1))


def random_graph(model: str, params: Dict[str, Any], seed=None) -> Gso:
    """
    Sample an unweighted symmetric adjacency from one of the random graph models.

    ``params`` keys: ER ``n_nodes, p``; SBM ``n_nodes, n_communities, p_in,
    p_out``; SW ``n_nodes, k, beta``; Regular ``n_nodes, degree``; PLC
    ``n_nodes, m, p``; Caveman ``n_cliques, clique_size``.
    """
    nx_seed = _nx_seed(seed)
    labels = None
    if model == "ER":
        n, p = _require(params, "n_nodes", "p")
        graph = nx.gnp_random_graph(int(n), _check_probability("p", p), seed=nx_seed)
    elif model == "SBM":
        n, k, p_in, p_out = _require(params, "n_nodes", "n_communities", "p_in", "p_out")
        n, k = int(n), int(k)
        if not 1 <= k <= n:
            raise InvalidParams(f"cannot split {n} nodes into {k} communities")
        p_in, p_out = _check_probability("p_in", p_in), _check_probability("p_out", p_out)
        sizes = [n // k + (1 if b < n % k else 0) for b in range(k)]
        probs = [[p_in if a == b else p_out for b in range(k)] for a in range(k)]
        graph = nx.stochastic_block_model(sizes, probs, seed=nx_seed)
        labels = np.repeat(np.arange(k), sizes)
    elif model == "SW":
        n, k, beta = _require(params, "n_nodes", "k", "beta")
        if int(k) >= int(n):
            raise InvalidParams(f"small-world degree k={k} must be below n_nodes={n}")
        graph = nx.watts_strogatz_graph(int(n), int(k), _check_probability("beta", beta), seed=nx_seed)
    elif model == "Regular":
        n, d = (int(v) for v in _require(params, "n_nodes", "degree"))
        if d >= n or (n * d) % 2:
            raise InvalidParams(f"no {d}-regular graph on {n} nodes")
        graph = nx.random_regular_graph(d, n, seed=nx_seed)
    elif model == "PLC":
        n, m, p = _require(params, "n_nodes", "m", "p")
        if not 1 <= int(m) < int(n):
            raise InvalidParams(f"powerlaw-cluster m={m} must be in [1, n_nodes)")
        graph = nx.powerlaw_cluster_graph(int(n), int(m), _check_probability("p", p), seed=nx_seed)
    elif model == "Caveman":
        n_cliques, size = (int(v) for v in _require(params, "n_cliques", "clique_size"))
        if n_cliques < 1 or size < 2:
            raise InvalidParams("caveman graphs need >= 1 clique of size >= 2")
        graph = nx.connected_caveman_graph(n_cliques, size)
        labels = np.repeat(np.arange(n_cliques), size)
    else:
        raise InvalidParams(f"unknown graph model {model!r}")

    adjacency = nx.to_numpy_array(graph, nodelist=range(graph.number_of_nodes()), weight=None)
    logger.debug("Sampled %s graph with %d edges", model, graph.number_of_edges())
    return Gso(adjacency, GsoKind.ADJACENCY, node_labels=labels)


class GraphFilter:
    """Polynomial graph filter H = sum_r h_r S^r tied to a shift operator."""

    def __init__(self, coeffs: Sequence[float], gso: Gso):
        self.coeffs = np.asarray(coeffs, dtype=float).ravel()
        if self.coeffs.size == 0:
            raise InvalidParams("a graph filter needs at least one coefficient")
        self.coeffs.setflags(write=False)
        self.gso = gso
        operator = horner(self.coeffs, gso.matrix, np.eye(gso.n_nodes))
        operator.setflags(write=False)
        self.operator = operator

    @property
    def order(self) -> int:
        return self.coeffs.size

    def frequency_response(self) -> np.ndarray:
        return self.gso.vandermonde(self.order) @ self.coeffs


def horner(coeffs: np.ndarray, shift: np.ndarray, x: np.ndarray) -> np.ndarray:
    """sum_r h_r S^r x evaluated by Horner's rule (never forms S^r)."""
    out = coeffs[-1] * x
    for h_r in coeffs[-2::-1]:
        out = shift @ out + h_r * x
    return out


def filter_from_coeffs(coeffs: Sequence[float], shift: np.ndarray) -> np.ndarray:
    shift = np.asarray(shift, dtype=float)
    return horner(np.asarray(coeffs, dtype=float), shift, np.eye(shift.shape[0]))


@dataclass
class SignalSet:
    X: np.ndarray
    truth: Optional[np.ndarray] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float).T).T
        if self.truth is not None:
            self.truth = np.atleast_2d(np.asarray(self.truth, dtype=float).T).T
            if self.truth.shape != self.X.shape:
                raise DimensionMismatch(f"truth {self.truth.shape} vs signals {self.X.shape}")

    @property
    def n_nodes(self) -> int:
        return self.X.shape[0]

    @property
    def n_signals(self) -> int:
        return self.X.shape[1]


def _signals(X) -> np.ndarray:
    return X.X if isinstance(X, SignalSet) else np.asarray(X, dtype=float)


def apply_filter(graph_filter: GraphFilter, X):
    """Y = H X. Returns the same container type it was given."""
    data = _signals(X)
    if data.shape[0] != graph_filter.gso.n_nodes:
        raise DimensionMismatch(f"filter has N={graph_filter.gso.n_nodes}, signals have {data.shape[0]} rows")
    out = horner(graph_filter.coeffs, graph_filter.gso.matrix, data)
    if isinstance(X, SignalSet):
        return SignalSet(out, metadata={"model": "filtered", "coeffs": graph_filter.coeffs.tolist()})
    return out


def gft(gso: Gso, x) -> np.ndarray:
    x = np.asarray(x)
    if x.shape[0] != gso.n_nodes:
        raise DimensionMismatch(f"signal length {x.shape[0]} vs N={gso.n_nodes}")
    return gso.inverse_eigenvectors @ x


def igft(gso: Gso, x_freq) -> np.ndarray:
    x_freq = np.asarray(x_freq)
    if x_freq.shape[0] != gso.n_nodes:
        raise DimensionMismatch(f"spectrum length {x_freq.shape[0]} vs N={gso.n_nodes}")
    out = gso.eigenvectors @ x_freq
    return out.real if np.iscomplexobj(out) and np.allclose(out.imag, 0) else out


# ---------------------------------------------------------------------------
# signal models
# ---------------------------------------------------------------------------

SIGNAL_MODELS = (
    "Bandlimited",
    "DSGS",
    "Smooth",
    "StationaryWhite",
    "DiffusedMedian",
    "PiecewiseConstant",
    "WhiteNoise",
    "PolyCovariance",
    "Mrf",
)


def _default_lowpass(gso: Gso) -> np.ndarray:
    radius = max(gso.spectral_norm(), 1e-12)
    return np.array([1.0, 1.0 / radius])


def generate_signal(gso: Gso, model: str, params: Optional[Dict[str, Any]] = None, seed=None) -> SignalSet:
    """
    Draw ``n_signals`` columns (default 1) from a graph signal model.

    Bandlimited: ``bandwidth``. DSGS: ``sparsity`` and ``coeffs`` or ``order``.
    Smooth: ``alpha``. StationaryWhite / PolyCovariance: ``coeffs``.
    DiffusedMedian: optional low-pass ``coeffs``. PiecewiseConstant: optional
    ``labels`` (defaults to the graph's community labels). Mrf: ``phi``.
    """
    params = dict(params or {})
    rng = np.random.default_rng(seed)
    n = gso.n_nodes
    m = int(params.get("n_signals", 1))
    if m < 1:
        raise InvalidParams("n_signals must be >= 1")
    meta: Dict[str, Any] = {"model": model}

    if model == "Bandlimited":
        k = int(params.get("bandwidth", 0))
        if not 1 <= k <= n:
            raise InvalidParams(f"bandwidth {k} outside [1, {n}]")
        coeffs = rng.standard_normal((k, m))
        X = np.real(gso.leading(k) @ coeffs)
        meta.update(bandwidth=k, freq_coeffs=coeffs)
    elif model == "DSGS":
        sparsity = int(params.get("sparsity", 0))
        if not 0 <= sparsity <= n:
            raise InvalidParams(f"sparsity {sparsity} outside [0, {n}]")
        if "coeffs" in params:
            h = np.asarray(params["coeffs"], dtype=float)
        else:
            h = rng.standard_normal(int(params.get("order", 3)))
        seeds = np.zeros((n, m))
        supports = []
        for col in range(m):
            support = np.sort(rng.choice(n, size=sparsity, replace=False))
            seeds[support, col] = rng.standard_normal(sparsity)
            supports.append(support)
        X = horner(h, gso.matrix, seeds)
        meta.update(seeds=seeds, supports=supports, coeffs=h)
    elif model == "Smooth":
        alpha = float(params.get("alpha", 1.0))
        if alpha < 0:
            raise InvalidParams("alpha must be >= 0")
        white = rng.standard_normal((n, m))
        X = scipy.linalg.solve(np.eye(n) + alpha * _laplacian_of(gso), white, assume_a="pos")
    elif model in ("StationaryWhite", "PolyCovariance"):
        if "coeffs" not in params:
            raise InvalidParams(f"{model} needs filter coeffs")
        H = filter_from_coeffs(params["coeffs"], gso.matrix)
        X = H @ rng.standard_normal((n, m))
        meta.update(coeffs=np.asarray(params["coeffs"], dtype=float), covariance=H @ H.T)
    elif model == "DiffusedMedian":
        h = np.asarray(params.get("coeffs", _default_lowpass(gso)), dtype=float)
        X = neighborhood_median(gso, horner(h, gso.matrix, rng.standard_normal((n, m))))
        meta.update(coeffs=h)
    elif model == "PiecewiseConstant":
        labels = params.get("labels", gso.node_labels)
        if labels is None:
            raise InvalidParams("PiecewiseConstant needs node labels")
        labels = np.asarray(labels, dtype=float).ravel()
        if labels.size != n:
            raise DimensionMismatch(f"{labels.size} labels for {n} nodes")
        X = np.repeat((labels + 1.0)[:, None], m, axis=1)
    elif model == "WhiteNoise":
        X = rng.standard_normal((n, m))
    elif model == "Mrf":
        phi = float(params.get("phi", 0.5))
        lam_min = float(np.min(np.real(gso.eigenvalues)))
        sigma = 1.0 - min(phi * lam_min, phi * float(np.max(np.real(gso.eigenvalues))))
        precision = sigma * np.eye(n) + phi * gso.matrix
        covariance = np.linalg.inv(precision)
        X = scipy.linalg.sqrtm(covariance).real @ rng.standard_normal((n, m))
        meta.update(covariance=covariance, phi=phi, sigma=sigma)
    else:
        raise InvalidParams(f"unknown signal model {model!r}")
    return SignalSet(X, metadata=meta)


def _laplacian_of(gso: Gso) -> np.ndarray:
    if gso.kind is GsoKind.LAPLACIAN:
        return np.asarray(gso.matrix)
    return laplacian(gso.matrix)


def add_noise(X: np.ndarray, power: float, seed=None) -> np.ndarray:
    """Add white Gaussian noise with ``||n||^2 = power * ||x||^2`` per column."""
    if power < 0:
        raise InvalidParams("noise power must be >= 0")
    X = np.asarray(X, dtype=float)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(X.shape)
    col_norm = np.linalg.norm(noise, axis=0, keepdims=True)
    noise *= np.sqrt(power) * np.linalg.norm(X, axis=0, keepdims=True) / np.maximum(col_norm, 1e-300)
    return X + noise


def neighborhood_median(gso: Gso, X: np.ndarray) -> np.ndarray:
    """Median of each node's closed neighborhood, column by column."""
    X = np.asarray(X, dtype=float)
    squeeze = X.ndim == 1
    X = X.reshape(X.shape[0], -1)
    support = (np.abs(np.asarray(gso.matrix)) > 0) | np.eye(gso.n_nodes, dtype=bool)
    out = np.empty_like(X)
    for i in range(gso.n_nodes):
        out[i] = np.median(X[support[i]], axis=0)
    return out[:, 0] if squeeze else out


def sample_covariance(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return X @ X.T / X.shape[1]


# ---------------------------------------------------------------------------
# non-robust baselines
# ---------------------------------------------------------------------------


@dataclass
class FilterFit:
    coeffs: np.ndarray
    rank: int
    rank_deficient: bool
    residual: float


def _lstsq_real(A: np.ndarray, b: np.ndarray):
    if np.iscomplexobj(A) or np.iscomplexobj(b):
        A = np.vstack([A.real, A.imag])
        b = np.concatenate([np.real(b), np.imag(b)])
    cond = max(A.shape) * np.finfo(float).eps
    sol, _, rank, _ = scipy.linalg.lstsq(A, b, cond=cond)
    return sol, int(rank), float(np.linalg.norm(A @ sol - b))


def identify_filter_ls(gso: Gso, X, Y, order: int) -> FilterFit:
    """
    Least-squares filter coefficients in the frequency domain,
    vec(Y) = ((V^{-1}X)^T kr V) Psi h. A rank-deficient system returns the
    minimum-norm solution with ``rank_deficient`` set.
    """
    X, Y = _signals(X), _signals(Y)
    if X.shape != Y.shape or X.shape[0] != gso.n_nodes:
        raise DimensionMismatch(f"inputs {X.shape}, outputs {Y.shape}, N={gso.n_nodes}")
    design = scipy.linalg.khatri_rao((gso.inverse_eigenvectors @ X).T, gso.eigenvectors) @ gso.vandermonde(order)
    h, rank, residual = _lstsq_real(design, Y.flatten(order="F"))
    fit = FilterFit(coeffs=h, rank=rank, rank_deficient=rank < order, residual=residual)
    if fit.rank_deficient:
        warnings.warn(f"filter identification rank {rank} < order {order}", RankDeficientWarning, stacklevel=2)
    return fit


def identify_filter_ls_vertex(gso: Gso, X, Y, order: int) -> FilterFit:
    """Vertex-domain counterpart: vec(Y) = [vec(X), vec(SX), ...] h."""
    X, Y = _signals(X), _signals(Y)
    if X.shape != Y.shape or X.shape[0] != gso.n_nodes:
        raise DimensionMismatch(f"inputs {X.shape}, outputs {Y.shape}, N={gso.n_nodes}")
    columns = []
    shifted = X
    for _ in range(order):
        columns.append(shifted.flatten(order="F"))
        shifted = gso.matrix @ shifted
    h, rank, residual = _lstsq_real(np.column_stack(columns), Y.flatten(order="F"))
    return FilterFit(coeffs=h, rank=rank, rank_deficient=rank < order, residual=residual)


def denoise_bandlimited(gso: Gso, x, k: int) -> np.ndarray:
    if not gso.kind.symmetric:
        raise InvalidParams("bandlimited projection requires an undirected shift operator")
    x = np.asarray(x, dtype=float)
    if x.shape[0] != gso.n_nodes:
        raise DimensionMismatch(f"signal length {x.shape[0]} vs N={gso.n_nodes}")
    V_k = gso.leading(k)
    return V_k @ (V_k.T @ x)


def denoise_quadratic(
    gso: Gso,
    x,
    alpha: float,
    regularizer: str = "LaplacianQuadratic",
    highpass: Optional[np.ndarray] = None,
) -> np.ndarray:
    """x_hat = (I + alpha Q)^{-1} x with Q = L or Q = H_hp^T H_hp."""
    if alpha < 0:
        raise InvalidParams("alpha must be >= 0")
    x = np.asarray(x, dtype=float)
    if x.shape[0] != gso.n_nodes:
        raise DimensionMismatch(f"signal length {x.shape[0]} vs N={gso.n_nodes}")
    if alpha == 0:
        return x.copy()
    if regularizer == "LaplacianQuadratic":
        Q = _laplacian_of(gso)
    elif regularizer == "FilterSmoothness":
        if highpass is None:
            raise InvalidParams("FilterSmoothness needs a high-pass filter matrix")
        highpass = np.asarray(highpass, dtype=float)
        Q = highpass.T @ highpass
    else:
        raise InvalidParams(f"unknown regularizer {regularizer!r}")
    return scipy.linalg.solve(np.eye(gso.n_nodes) + alpha * Q, x, assume_a="pos")


def nerr(estimate, truth) -> float:
    """Normalized squared error ||estimate - truth||_F^2 / ||truth||_F^2."""
    estimate = np.asarray(estimate.matrix if isinstance(estimate, Gso) else estimate)
    truth = np.asarray(truth.matrix if isinstance(truth, Gso) else truth)
    if estimate.shape != truth.shape:
        raise DimensionMismatch(f"estimate {estimate.shape} vs truth {truth.shape}")
    ref = np.linalg.norm(truth) ** 2
    if ref == 0:
        raise ZeroReference("normalized error against an all-zero reference")
    return float(np.linalg.norm(estimate - truth) ** 2 / ref)
