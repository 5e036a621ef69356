"""
Untrained graph neural denoisers.

Two architectures are fitted directly to a single noisy observation, relying on
early stopping: the graph convolutional generator (GCG), which applies a fixed
low-pass filter ``H`` at every layer, and the graph decoder (GDec), which
upsamples through a hierarchy of clusterings of the graph. Their 2-layer forms
``ReLU(H Theta) b`` admit a closed-form expected squared Jacobian, whose
spectrum explains why the structured signal is learned before the noise.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import scipy.linalg
import torch
from scipy.cluster import hierarchy
from scipy.sparse.csgraph import shortest_path
from scipy.spatial.distance import squareform

from .errors import Divergence, InfeasibleCut, InvalidParams, ShapeMismatch, StepTooLarge, ZeroRow
from .graph_core import Gso
from .solvers import power_iteration

logger = logging.getLogger(__name__)

LINKAGES = ("average", "complete", "single", "weighted")


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_grad(x: np.ndarray) -> np.ndarray:
    # derivative at exactly 0 is taken as 0
    return (x > 0).astype(float)


# ---------------------------------------------------------------------------
# architectures
# ---------------------------------------------------------------------------


@dataclass
class GcgArch:
    """Deep GCG: Y_l = ReLU(H Y_{l-1} Theta_l), last layer linear."""

    filter: np.ndarray
    widths: Sequence[int]
    Z: np.ndarray
    filter_output: bool = True

    def __post_init__(self):
        self.filter = np.asarray(self.filter, dtype=float)
        self.Z = np.asarray(self.Z, dtype=float)
        if len(self.widths) < 2:
            raise InvalidParams("a GCG needs at least one layer")
        if self.Z.shape != (self.filter.shape[1], self.widths[0]):
            raise ShapeMismatch(f"input Z {self.Z.shape} vs ({self.filter.shape[1]}, {self.widths[0]})")

    @property
    def n_layers(self) -> int:
        return len(self.widths) - 1

    @property
    def operators(self) -> List[Optional[np.ndarray]]:
        ops: List[Optional[np.ndarray]] = [self.filter] * self.n_layers
        if not self.filter_output:
            ops[-1] = None
        return ops


@dataclass
class UpsamplingLayer:
    upsampler: np.ndarray
    adjacency: np.ndarray
    membership: np.ndarray


@dataclass
class GdecArch:
    """Deep GDec: Y_l = ReLU(U_l Y_{l-1} Theta_l), last layer linear."""

    layers: List[UpsamplingLayer]
    widths: Sequence[int]
    Z: np.ndarray
    gamma: float = 0.5

    def __post_init__(self):
        self.Z = np.asarray(self.Z, dtype=float)
        if len(self.widths) != len(self.layers) + 1:
            raise ShapeMismatch(f"{len(self.layers)} upsamplers need {len(self.layers) + 1} widths")
        first = self.layers[0].upsampler
        if self.Z.shape != (first.shape[1], self.widths[0]):
            raise ShapeMismatch(f"input Z {self.Z.shape} vs ({first.shape[1]}, {self.widths[0]})")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if nxt.upsampler.shape[1] != prev.upsampler.shape[0]:
                raise ShapeMismatch("consecutive upsamplers do not chain")

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    @property
    def operators(self) -> List[Optional[np.ndarray]]:
        return [layer.upsampler for layer in self.layers]


@dataclass
class TwoLayerArch:
    """Simplified 2-layer form f(Theta) = ReLU(op Theta) b with b fixed at +-1/sqrt(F)."""

    operator: np.ndarray
    b: np.ndarray
    kind: str = "GCG"

    def __post_init__(self):
        self.operator = np.asarray(self.operator, dtype=float)
        self.b = np.asarray(self.b, dtype=float).ravel()

    @property
    def width(self) -> int:
        return self.b.size

    @property
    def weight_shape(self) -> Tuple[int, int]:
        return (self.operator.shape[1], self.width)


Arch = Union[GcgArch, GdecArch, TwoLayerArch]


def output_signs(width: int) -> np.ndarray:
    """Half +1/sqrt(F), half -1/sqrt(F), so sum(b^2) = 1."""
    if width < 1:
        raise InvalidParams("width must be >= 1")
    b = np.ones(width)
    b[width // 2 :] = -1.0
    return b / np.sqrt(width)


def make_two_layer(operator: np.ndarray, width: int, kind: str = "GCG") -> TwoLayerArch:
    return TwoLayerArch(operator=operator, b=output_signs(width), kind=kind)


def make_gcg(H: np.ndarray, widths: Sequence[int], seed=None, filter_output: bool = True) -> GcgArch:
    rng = np.random.default_rng(seed)
    H = np.asarray(H, dtype=float)
    return GcgArch(filter=H, widths=list(widths), Z=rng.standard_normal((H.shape[1], widths[0])), filter_output=filter_output)


def make_gdec(
    gso: Gso, layer_sizes: Sequence[int], widths: Sequence[int], gamma: float = 0.5, seed=None
) -> GdecArch:
    layers = build_dendrogram_upsamplers(gso, layer_sizes, gamma).layers
    rng = np.random.default_rng(seed)
    n0 = layers[0].upsampler.shape[1]
    return GdecArch(layers=layers, widths=list(widths), Z=rng.standard_normal((n0, widths[0])), gamma=gamma)


def init_weights(arch: Arch, seed=None) -> List[np.ndarray]:
    """Zero-mean Gaussian weights with variance 1/fan_in."""
    rng = np.random.default_rng(seed)
    if isinstance(arch, TwoLayerArch):
        fan_in, width = arch.weight_shape
        return [rng.standard_normal((fan_in, width)) / np.sqrt(fan_in)]
    widths = list(arch.widths)
    return [rng.standard_normal((f_in, f_out)) / np.sqrt(f_in) for f_in, f_out in zip(widths[:-1], widths[1:])]


def _as_list(weights) -> List[np.ndarray]:
    if isinstance(weights, np.ndarray):
        return [weights]
    return list(weights)


def _check_weights(arch: Arch, weights: List[np.ndarray]) -> None:
    if isinstance(arch, TwoLayerArch):
        if len(weights) != 1 or weights[0].shape != arch.weight_shape:
            raise ShapeMismatch(f"2-layer weights must be one {arch.weight_shape} matrix")
        return
    widths = list(arch.widths)
    expected = list(zip(widths[:-1], widths[1:]))
    if len(weights) != len(expected) or any(w.shape != s for w, s in zip(weights, expected)):
        raise ShapeMismatch(f"weights {[w.shape for w in weights]} vs expected {expected}")


# ---------------------------------------------------------------------------
# forward and backward passes
# ---------------------------------------------------------------------------


def _forward_cache(arch: Arch, weights: List[np.ndarray]):
    if isinstance(arch, TwoLayerArch):
        pre = arch.operator @ weights[0]
        return relu(pre) @ arch.b, [pre]
    Y = arch.Z
    pres = []
    ops = arch.operators
    for layer, (op, theta) in enumerate(zip(ops, weights)):
        mixed = Y if op is None else op @ Y
        pre = mixed @ theta
        pres.append(pre)
        Y = pre if layer == len(ops) - 1 else relu(pre)
    return Y.ravel(), pres


def forward(arch: Arch, weights) -> np.ndarray:
    weights = _as_list(weights)
    _check_weights(arch, weights)
    return _forward_cache(arch, weights)[0]


def gcg_forward(arch: Union[GcgArch, TwoLayerArch], weights) -> np.ndarray:
    if isinstance(arch, GdecArch):
        raise InvalidParams("gcg_forward called with a GDec architecture")
    return forward(arch, weights)


def gdec_forward(arch: Union[GdecArch, TwoLayerArch], weights) -> np.ndarray:
    if isinstance(arch, GcgArch):
        raise InvalidParams("gdec_forward called with a GCG architecture")
    return forward(arch, weights)


def analytic_gradient(arch: Arch, weights, residual) -> Union[np.ndarray, List[np.ndarray]]:
    """
    Gradient of 0.5 ||x - f(Theta)||^2 given ``residual = f(Theta) - x``.

    The 2-layer form uses the Jacobian blocks b_f op^T diag(ReLU'(op theta_f));
    deeper networks backpropagate layer by layer. Returns an array for 2-layer
    architectures and a list of per-layer arrays otherwise.
    """
    weights = _as_list(weights)
    _check_weights(arch, weights)
    residual = np.asarray(residual, dtype=float).ravel()
    _, pres = _forward_cache(arch, weights)
    if isinstance(arch, TwoLayerArch):
        return arch.operator.T @ (relu_grad(pres[0]) * np.outer(residual, arch.b))

    ops = arch.operators
    grads: List[np.ndarray] = [None] * len(weights)  # type: ignore[list-item]
    upstream = residual[:, None]
    for layer in range(len(weights) - 1, -1, -1):
        op = ops[layer]
        prev = arch.Z if layer == 0 else relu(pres[layer - 1])
        mixed = prev if op is None else op @ prev
        grads[layer] = mixed.T @ upstream
        if layer > 0:
            back = upstream @ weights[layer].T
            back = back if op is None else op.T @ back
            upstream = back * relu_grad(pres[layer - 1])
    return grads


def jacobian(arch: Arch, weights) -> np.ndarray:
    """Exact N x P Jacobian of the output w.r.t. all weights (row n = grad of output n)."""
    weights = _as_list(weights)
    n_out = forward(arch, weights).size
    rows = []
    for n in range(n_out):
        e_n = np.zeros(n_out)
        e_n[n] = 1.0
        g = analytic_gradient(arch, weights, e_n)
        rows.append(np.concatenate([a.ravel() for a in _as_list(g)]))
    return np.vstack(rows)


# ---------------------------------------------------------------------------
# expected squared Jacobian
# ---------------------------------------------------------------------------


@dataclass
class JacobianSpectrum:
    matrix: np.ndarray
    eigenvectors: np.ndarray
    eigenvalues: np.ndarray

    @property
    def singular_values(self) -> np.ndarray:
        return np.sqrt(np.clip(self.eigenvalues, 0.0, None))

    def leading(self, k: int) -> np.ndarray:
        return self.eigenvectors[:, :k]


def _spectrum(matrix: np.ndarray) -> JacobianSpectrum:
    matrix = 0.5 * (matrix + matrix.T)
    eigvals, eigvecs = scipy.linalg.eigh(matrix)
    order = np.argsort(-eigvals, kind="stable")
    return JacobianSpectrum(matrix=matrix, eigenvectors=eigvecs[:, order], eigenvalues=eigvals[order])


def expected_sq_jacobian(arch: Union[TwoLayerArch, np.ndarray]) -> JacobianSpectrum:
    """
    E[J J^T] = 0.5 (11^T - arccos(C^{-1} M C^{-1}) / pi) * M with M = op op^T and
    C the diagonal of row norms of ``op``.
    """
    op = arch.operator if isinstance(arch, TwoLayerArch) else np.asarray(arch, dtype=float)
    gram = op @ op.T
    norms = np.sqrt(np.diag(gram))
    if (norms == 0).any():
        raise ZeroRow(f"operator rows {np.flatnonzero(norms == 0).tolist()} are zero")
    corr = np.clip(gram / np.outer(norms, norms), -1.0, 1.0)
    return _spectrum(0.5 * (1.0 - np.arccos(corr) / np.pi) * gram)


def empirical_sq_jacobian(arch: Arch, n_draws: int = 20000, seed=None) -> np.ndarray:
    """Monte-Carlo average of J J^T over Gaussian weight draws."""
    rng = np.random.default_rng(seed)
    if isinstance(arch, TwoLayerArch):
        # every draw is one hidden unit; averaging unit contributions with b_f^2 = 1/F
        op = arch.operator
        acc = np.zeros((op.shape[0], op.shape[0]))
        chunk = 4096
        done = 0
        while done < n_draws:
            size = min(chunk, n_draws - done)
            active = relu_grad(op @ rng.standard_normal((op.shape[1], size)))
            acc += active @ active.T
            done += size
        return (acc / n_draws) * (op @ op.T)
    n_out = forward(arch, init_weights(arch, rng)).size
    acc = np.zeros((n_out, n_out))
    for _ in range(n_draws):
        J = jacobian(arch, init_weights(arch, rng))
        acc += J @ J.T
    return acc / n_draws


def eigen_alignment(V_k: np.ndarray, W_k: np.ndarray) -> float:
    """(1/K) ||V_K - W_K Q||_F with Q the orthogonal Procrustes rotation."""
    V_k, W_k = np.asarray(V_k, dtype=float), np.asarray(W_k, dtype=float)
    if V_k.ndim == 1:
        V_k, W_k = V_k.reshape(-1, 1), W_k.reshape(-1, 1)
    if V_k.shape != W_k.shape:
        raise ShapeMismatch(f"{V_k.shape} vs {W_k.shape}")
    U, _, Vt = np.linalg.svd(W_k.T @ V_k)
    Q = U @ Vt
    return float(np.linalg.norm(V_k - W_k @ Q) / V_k.shape[1])


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


@dataclass
class FitTrace:
    loss: List[float] = field(default_factory=list)
    nmse: List[float] = field(default_factory=list)
    best_epoch: int = 0
    stopped_epoch: int = 0
    best_output: Optional[np.ndarray] = None

    def to_frame(self) -> pd.DataFrame:
        nmse = self.nmse if self.nmse else [np.nan] * len(self.loss)
        return pd.DataFrame({"epoch": np.arange(len(self.loss)), "loss": self.loss, "nmse": nmse})

    def epochs_to_fraction(self, fraction: float = 0.5) -> int:
        """First epoch at which the loss falls below ``fraction`` of its initial value."""
        target = fraction * self.loss[0]
        below = np.flatnonzero(np.asarray(self.loss) <= target)
        return int(below[0]) if below.size else len(self.loss)


def default_learning_rate(arch: Arch, scale: float = 0.01) -> float:
    if isinstance(arch, TwoLayerArch):
        kernel = expected_sq_jacobian(arch).matrix
        top = power_iteration(lambda v: kernel @ v, kernel.shape[0])
        return scale / max(top, 1e-300)
    return 1e-3


class _TorchNet(torch.nn.Module):
    """The same forward pass in torch, for the autograd-driven optimizers."""

    def __init__(self, arch: Arch, weights: List[np.ndarray]):
        super().__init__()
        self.two_layer = isinstance(arch, TwoLayerArch)
        self.weights = torch.nn.ParameterList(
            [torch.nn.Parameter(torch.tensor(w, dtype=torch.float64)) for w in weights]
        )
        if self.two_layer:
            self.register_buffer("op", torch.tensor(arch.operator, dtype=torch.float64))
            self.register_buffer("b", torch.tensor(arch.b, dtype=torch.float64))
            self.ops: List[Optional[torch.Tensor]] = []
        else:
            self.register_buffer("Z", torch.tensor(arch.Z, dtype=torch.float64))
            self.ops = [None if op is None else torch.tensor(op, dtype=torch.float64) for op in arch.operators]

    def forward(self) -> torch.Tensor:
        if self.two_layer:
            return torch.relu(self.op @ self.weights[0]) @ self.b
        Y = self.Z
        last = len(self.ops) - 1
        for layer, (op, theta) in enumerate(zip(self.ops, self.weights)):
            Y = (Y if op is None else op @ Y) @ theta
            if layer < last:
                Y = torch.relu(Y)
        return Y.reshape(-1)


def fit_untrained(
    arch: Arch,
    x_observed,
    epochs: int = 1000,
    lr: Optional[float] = None,
    optimizer: str = "GD",
    seed=None,
    truth=None,
    stopping: str = "budget",
    weights=None,
    momentum: float = 0.0,
    plateau_window: int = 20,
    plateau_tol: float = 1e-5,
) -> Tuple[np.ndarray, FitTrace]:
    """
    Fit the network output to a single observation by full-batch descent on
    0.5 ||x - f(Theta)||^2.

    ``optimizer`` is ``GD`` (manual backprop), ``SGD`` (torch, full batch,
    optional momentum) or ``Adam`` (torch). ``stopping`` is ``budget`` (run all
    epochs) or ``plateau`` (stop once the loss improved by less than
    ``plateau_tol`` relative over ``plateau_window`` epochs). The trace holds
    the loss (and NMSE against ``truth`` when given) after every epoch.
    """
    x_observed = np.asarray(x_observed, dtype=float).ravel()
    if lr is None:
        lr = default_learning_rate(arch)
    if lr <= 0:
        raise InvalidParams("learning rate must be > 0")
    if stopping not in ("budget", "plateau"):
        raise InvalidParams(f"unknown stopping policy {stopping!r}")
    weights = init_weights(arch, seed) if weights is None else [w.copy() for w in _as_list(weights)]
    _check_weights(arch, weights)
    truth = None if truth is None else np.asarray(truth, dtype=float).ravel()
    truth_norm = None if truth is None else max(np.linalg.norm(truth) ** 2, 1e-300)

    trace = FitTrace()
    best_score = np.inf
    output = None

    def observe(out: np.ndarray, epoch: int) -> bool:
        nonlocal best_score, output
        output = out
        loss = 0.5 * float(np.sum((x_observed - out) ** 2))
        trace.loss.append(loss)
        score = loss
        if truth is not None:
            score = float(np.sum((truth - out) ** 2) / truth_norm)
            trace.nmse.append(score)
        if score < best_score:
            best_score, trace.best_epoch, trace.best_output = score, epoch, out.copy()
        initial = trace.loss[0]
        if initial > 0 and loss > 1e6 * initial or not np.isfinite(loss):
            raise Divergence(f"loss {loss:.3g} exceeded 1e6 x initial at epoch {epoch}")
        if stopping == "plateau" and epoch >= plateau_window:
            past = trace.loss[epoch - plateau_window]
            if past - loss < plateau_tol * max(past, 1e-300):
                return True
        return False

    if optimizer == "GD":
        out = forward(arch, weights)
        trace.stopped_epoch = epochs
        for epoch in range(epochs + 1):
            if observe(out, epoch):
                trace.stopped_epoch = epoch
                break
            if epoch == epochs:
                break
            grads = _as_list(analytic_gradient(arch, weights, out - x_observed))
            weights = [w - lr * g for w, g in zip(weights, grads)]
            out = forward(arch, weights)
    elif optimizer in ("SGD", "Adam"):
        net = _TorchNet(arch, weights)
        target = torch.tensor(x_observed, dtype=torch.float64)
        if optimizer == "SGD":
            opt = torch.optim.SGD(net.parameters(), lr=lr, momentum=momentum)
        else:
            opt = torch.optim.Adam(net.parameters(), lr=lr)
        trace.stopped_epoch = epochs
        for epoch in range(epochs + 1):
            opt.zero_grad()
            pred = net()
            if observe(pred.detach().numpy().copy(), epoch):
                trace.stopped_epoch = epoch
                break
            if epoch == epochs:
                break
            loss = 0.5 * torch.sum((target - pred) ** 2)
            loss.backward()
            opt.step()
    else:
        raise InvalidParams(f"unknown optimizer {optimizer!r}")

    logger.debug("fit stopped at epoch %d, best epoch %d", trace.stopped_epoch, trace.best_epoch)
    return output, trace


# ---------------------------------------------------------------------------
# analysis helpers
# ---------------------------------------------------------------------------


@dataclass
class BoundTerms:
    signal: float
    width: float
    noise: float

    @property
    def total(self) -> float:
        return self.signal + self.width + self.noise


def early_stopping_bound(
    sigma: np.ndarray,
    eta: float,
    t: int,
    x0: np.ndarray,
    x: np.ndarray,
    noise: np.ndarray,
    W: np.ndarray,
    xi: float,
    delta: float,
    k: int,
) -> BoundTerms:
    """
    Error bound after ``t`` gradient steps, split into its signal term
    ((1 - eta s_K^2)^t + delta (1 - eta s_N^2)^t) ||x0||, width term xi ||x||
    and noise term sqrt(sum_i ((1 - eta s_i^2)^t - 1)^2 (w_i^T n)^2).
    """
    sigma = np.asarray(sigma, dtype=float)
    if eta > 1.0 / sigma[0] ** 2:
        raise StepTooLarge(f"eta={eta} exceeds 1/sigma_1^2={1 / sigma[0] ** 2}")
    decay = (1.0 - eta * sigma**2) ** t
    signal = (decay[k - 1] + delta * decay[-1]) * float(np.linalg.norm(x0))
    proj = np.asarray(W).T @ np.asarray(noise, dtype=float)
    noise_term = float(np.sqrt(np.sum((decay - 1.0) ** 2 * proj**2)))
    return BoundTerms(signal=signal, width=xi * float(np.linalg.norm(x)), noise=noise_term)


def bound_trajectory(sigma, eta, epochs: Sequence[int], x0, x, noise, W, xi, delta, k) -> pd.DataFrame:
    """Bound terms over a list of epochs, with monotonicity checks stored in ``attrs``."""
    rows = [early_stopping_bound(sigma, eta, t, x0, x, noise, W, xi, delta, k) for t in epochs]
    frame = pd.DataFrame(
        {
            "epoch": list(epochs),
            "signal": [r.signal for r in rows],
            "width": [r.width for r in rows],
            "noise": [r.noise for r in rows],
            "total": [r.total for r in rows],
        }
    )
    frame.attrs["signal_nonincreasing"] = bool(np.all(np.diff(frame["signal"]) <= 1e-12))
    frame.attrs["noise_nondecreasing"] = bool(np.all(np.diff(frame["noise"]) >= -1e-12))
    return frame


# ---------------------------------------------------------------------------
# dendrogram upsampling
# ---------------------------------------------------------------------------


@dataclass
class DendrogramUpsampling:
    layers: List[UpsamplingLayer]
    adjacencies: List[np.ndarray]
    labels: List[np.ndarray]


def cluster_labels(distances: np.ndarray, n_clusters: Sequence[int], method: str = "average") -> List[np.ndarray]:
    """Cut one agglomerative hierarchy at each requested cluster count."""
    D = np.asarray(distances, dtype=float)
    n = D.shape[0]
    if n == 1:
        return [np.zeros(1, dtype=int) for _ in n_clusters]
    tree = hierarchy.linkage(squareform(D, checks=False), method=method)
    # one count per call: cut_tree mislabels columns for ascending multi-count requests
    return [hierarchy.cut_tree(tree, n_clusters=[int(k)])[:, 0].astype(int) for k in n_clusters]


def build_dendrogram_upsamplers(
    gso: Gso, layer_sizes: Sequence[int], gamma: float = 0.5, linkage: str = "average"
) -> DendrogramUpsampling:
    """
    Cluster the graph hierarchically and build, for every consecutive pair of
    resolutions, the membership matrix P (children x parents), the cluster
    graph A at the finer resolution and the upsampler U = (gamma I + (1 - gamma) A) P.
    """
    if linkage not in LINKAGES:
        raise InvalidParams(f"unsupported linkage {linkage!r}")
    if not 0.0 <= gamma <= 1.0:
        raise InvalidParams("gamma must lie in [0, 1]")
    n = gso.n_nodes
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) == 1:
        sizes = [sizes[0], sizes[0]]
        strictly = False
    else:
        strictly = True
    if sizes[-1] != n or sizes[0] < 1 or any(b <= a if strictly else b < a for a, b in zip(sizes, sizes[1:])):
        raise InvalidParams(f"layer sizes {list(layer_sizes)} must increase strictly up to N={n}")

    A = np.abs(np.asarray(gso.matrix, dtype=float))
    np.fill_diagonal(A, 0.0)
    hops = shortest_path((A > 0).astype(float), unweighted=True, directed=False)
    finite = hops[np.isfinite(hops)]
    hops[~np.isfinite(hops)] = 2.0 * (finite.max(initial=0.0) + 1.0)
    labels = cluster_labels(hops, sizes, method=linkage)
    memberships = [np.eye(s)[lab] for s, lab in zip(sizes, labels)]
    adjacencies = []
    for s, M in zip(sizes, memberships):
        counts = M.T @ A @ M
        np.fill_diagonal(counts, 0.0)
        cluster_sizes = M.sum(axis=0)
        weighted = counts / np.sqrt(np.outer(cluster_sizes, cluster_sizes))
        row_sums = weighted.sum(axis=1, keepdims=True)
        adjacencies.append(np.divide(weighted, row_sums, out=np.zeros_like(weighted), where=row_sums > 0))

    layers = []
    for level in range(1, len(sizes)):
        P = (memberships[level].T @ memberships[level - 1] > 0).astype(float)
        if not np.all(P.sum(axis=1) == 1):
            raise InfeasibleCut(f"clusters at resolution {sizes[level]} do not nest in resolution {sizes[level - 1]}")
        adj = adjacencies[level]
        U = (gamma * np.eye(sizes[level]) + (1.0 - gamma) * adj) @ P
        layers.append(UpsamplingLayer(upsampler=U, adjacency=adj, membership=P))
    return DendrogramUpsampling(layers=layers, adjacencies=adjacencies, labels=labels)
