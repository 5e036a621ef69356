"""
Config-driven Monte-Carlo experiments.

An experiment is one trial kind run ``trials`` times at every value of one
swept parameter. Trials are seeded from (master seed, sweep index, trial
index), run in a process pool, and collected into a long-format table
``sweep,trial,metric,value,seconds,error`` plus a JSON summary.
"""

import copy
import json
import logging
import os
import time
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from .agss_sampling import (
    SCENARIOS,
    aggregation_bandlimited_recover,
    build_aggregation,
    recovery_rate,
    run_recovery_scenario,
    seed_recovered,
    selection_sampling_recover,
)
from .config import get_settings
from .errors import ConfigError, RgspError
from .graph_core import (
    SIGNAL_MODELS,
    Gso,
    add_noise,
    denoise_bandlimited,
    filter_from_coeffs,
    generate_signal,
    identify_filter_ls,
    nerr,
    random_graph,
)
from .perturbation import PerturbationSpec, perturb
from .robust_filter_id import RfiProblem, joint_rfi_solve, rfi_solve
from .topology_hidden import JointTopoProblem, joint_error, planted_joint_instance, support_fscore, topo_joint_solve
from .untrained_denoisers import (
    eigen_alignment,
    expected_sq_jacobian,
    fit_untrained,
    make_gcg,
    make_gdec,
    make_two_layer,
)

logger = logging.getLogger(__name__)

RESULT_COLUMNS = ["sweep", "trial", "metric", "value", "seconds", "error"]
GRAPH_MODELS = ("ER", "SBM", "SW", "Regular", "PLC", "Caveman")


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


def nmse(estimate, truth) -> float:
    return nerr(np.asarray(estimate, dtype=float), np.asarray(truth, dtype=float))


METRICS: Dict[str, Callable[..., float]] = {
    "nerr": nerr,
    "joint_error": joint_error,
    "recovery_rate": recovery_rate,
    "nmse": nmse,
    "support_fscore": support_fscore,
    "wall_seconds": lambda start: time.perf_counter() - start,
    "alignment": eigen_alignment,
    "best_epoch": lambda trace: float(trace.best_epoch),
}


def metric_family(name: str) -> str:
    """``nerr:H_fi`` belongs to the ``nerr`` family."""
    return name.split(":", 1)[0]


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    name: str
    kind: str
    trials: int
    seed: int
    graph: Dict[str, Any]
    sweep: Dict[str, Any]
    signal: Dict[str, Any] = field(default_factory=dict)
    perturbation: Dict[str, Any] = field(default_factory=dict)
    algorithm: Dict[str, Any] = field(default_factory=dict)
    output: Dict[str, Any] = field(default_factory=dict)
    metrics: Optional[List[str]] = None
    aggregate: str = "median"
    version: int = 1
    description: str = ""

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        missing = {"name", "kind", "graph", "sweep"} - set(raw)
        if missing:
            raise ConfigError(f"missing config keys: {sorted(missing)}")
        data = copy.deepcopy(raw)
        data.setdefault("trials", 1)
        data.setdefault("seed", 0)
        config = cls(**data)
        config.validate()
        return config

    def to_dict(self) -> Dict[str, Any]:
        return {name: copy.deepcopy(getattr(self, name)) for name in self.__dataclass_fields__}

    @property
    def sweep_values(self) -> List[Any]:
        return list(self.sweep.get("values", []))

    def at_sweep(self, value: Any) -> Dict[str, Any]:
        """Config sections with the swept dotted path set to ``value``."""
        setup = self.to_dict()
        path = self.sweep["name"].split(".")
        node = setup
        for key in path[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError(f"sweep path {self.sweep['name']!r} crosses a non-table value")
        node[path[-1]] = value
        return setup

    def metric_names(self) -> List[str]:
        declared = TRIAL_KINDS[self.kind].metrics(self.algorithm.get("params", {}))
        if self.metrics is None:
            return declared
        return [m for m in declared if m in self.metrics or metric_family(m) in self.metrics]

    def validate(self) -> None:
        """Check every section against its target module before any trial runs."""
        if self.kind not in TRIAL_KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; choose from {sorted(TRIAL_KINDS)}")
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigError("trials must be a positive integer")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        if self.aggregate not in ("median", "mean"):
            raise ConfigError("aggregate must be 'median' or 'mean'")
        if "name" not in self.sweep or not self.sweep_values:
            raise ConfigError("sweep needs a dotted 'name' and a nonempty 'values' list")
        if self.metrics is not None:
            unknown = [m for m in self.metrics if metric_family(m) not in METRICS]
            if unknown:
                raise ConfigError(f"unknown metrics {unknown}")
        kind = TRIAL_KINDS[self.kind]
        for value in self.sweep_values:
            setup = self.at_sweep(value)
            _validate_graph(setup["graph"])
            if setup.get("signal"):
                model = setup["signal"].get("model")
                if model not in SIGNAL_MODELS:
                    raise ConfigError(f"unknown signal model {model!r}")
            if setup.get("perturbation"):
                try:
                    PerturbationSpec.from_dict(setup["perturbation"])
                except RgspError as exc:
                    raise ConfigError(f"perturbation: {exc}") from exc
            params = setup.get("algorithm", {}).get("params", {})
            unknown = set(params) - kind.algorithm_keys
            if unknown:
                raise ConfigError(f"{self.kind}: unknown algorithm params {sorted(unknown)}")
            if self.kind == "agss_recovery" and params.get("scenario", "blind-sparse") not in RECOVERY_SCENARIOS:
                raise ConfigError(f"unknown recovery scenario {params.get('scenario')!r}")
        if not self.metric_names():
            raise ConfigError("no metric of this experiment kind was selected")


def _validate_graph(graph: Dict[str, Any]) -> None:
    model = graph.get("model")
    if model not in GRAPH_MODELS:
        raise ConfigError(f"unknown graph model {model!r}")
    try:
        random_graph(model, graph.get("params", {}), seed=0)
    except RgspError as exc:
        raise ConfigError(f"graph: {exc}") from exc


def load_config(path) -> ExperimentConfig:
    """Read a TOML (or the equivalent JSON) experiment config."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        raw = json.loads(text) if path.suffix == ".json" else tomllib.loads(text)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return ExperimentConfig.from_dict(raw)


def builtin_scenarios() -> List[ExperimentConfig]:
    """Experiment configs shipped in ``rgsp/scenarios``."""
    folder = resources.files("rgsp.scenarios")
    configs = []
    for entry in sorted(folder.iterdir(), key=lambda e: e.name):
        if entry.name.endswith(".toml"):
            configs.append(ExperimentConfig.from_dict(tomllib.loads(entry.read_text(encoding="utf-8"))))
    return configs


def get_scenario(name: str) -> ExperimentConfig:
    for config in builtin_scenarios():
        if config.name == name:
            return config
    raise ConfigError(f"no builtin scenario named {name!r}")


# ---------------------------------------------------------------------------
# trial kinds
# ---------------------------------------------------------------------------


def _graph(setup, seed) -> Gso:
    return random_graph(setup["graph"]["model"], setup["graph"].get("params", {}), seed=seed)


def _params(setup) -> Dict[str, Any]:
    return setup.get("algorithm", {}).get("params", {})


def _signal_params(setup) -> Dict[str, Any]:
    return setup.get("signal", {}).get("params", {})


def _normalized(gso: Gso) -> np.ndarray:
    return np.asarray(gso.matrix) / max(gso.spectral_norm(), 1e-12)


def trial_identity(setup, seq: np.random.SeedSequence) -> Dict[str, float]:
    """Noiseless filter identification on the true graph."""
    graph_seed, data_seed = seq.spawn(2)
    gso = _graph(setup, graph_seed)
    rng = np.random.default_rng(data_seed)
    order = int(_params(setup).get("order", 3))
    n_signals = int(_signal_params(setup).get("n_signals", gso.n_nodes))
    h = rng.standard_normal(order)
    X = rng.standard_normal((gso.n_nodes, n_signals))
    Y = filter_from_coeffs(h, gso.matrix) @ X
    fit = identify_filter_ls(gso, X, Y, order)
    return {"nerr": nerr(fit.coeffs, h)}


def trial_denoise(setup, seq) -> Dict[str, float]:
    """Untrained-network denoising of a noisy graph signal, with baselines."""
    graph_seed, signal_seed, noise_seed, net_seed = seq.spawn(4)
    params = _params(setup)
    gso = _graph(setup, graph_seed)
    n = gso.n_nodes
    signal = setup.get("signal") or {"model": "PiecewiseConstant"}
    truth = generate_signal(gso, signal["model"], signal.get("params"), seed=signal_seed).X[:, 0]
    noisy = add_noise(truth[:, None], float(params.get("noise", 0.1)), seed=noise_seed)[:, 0]
    arch_name = setup.get("algorithm", {}).get("name", "GCG")
    width = int(params.get("width", 64))
    if arch_name == "GCG":
        H = 0.5 * (np.eye(n) + _normalized(gso))
        arch = make_gcg(H, [width] * int(params.get("layers", 3)) + [1], seed=net_seed)
    elif arch_name == "GDec":
        sizes = list(params.get("layer_sizes", [max(n // 8, 1), max(n // 4, 2), max(n // 2, 3), n]))
        arch = make_gdec(gso, sizes, [width] * (len(sizes) - 1) + [1], gamma=float(params.get("gamma", 0.5)), seed=net_seed)
    else:
        raise ConfigError(f"unknown denoising architecture {arch_name!r}")
    start = time.perf_counter()
    output, trace = fit_untrained(
        arch,
        noisy,
        epochs=int(params.get("epochs", 500)),
        lr=params.get("lr"),
        optimizer=params.get("optimizer", "Adam"),
        seed=net_seed,
        truth=truth,
    )
    seconds = METRICS["wall_seconds"](start)
    k = int(params.get("bandwidth", max(n // 8, 1)))
    return {
        "nmse:best": float(min(trace.nmse)),
        "nmse:final": nmse(output, truth),
        "nmse:noisy": nmse(noisy, truth),
        "nmse:bandlimited": nmse(denoise_bandlimited(gso, noisy, k), truth),
        "best_epoch": METRICS["best_epoch"](trace),
        "wall_seconds:fit": seconds,
    }


def trial_alignment(setup, seq) -> Dict[str, float]:
    """Distance between the leading eigenvectors of the squared Jacobian and of the filter."""
    (graph_seed,) = seq.spawn(1)
    params = _params(setup)
    gso = _graph(setup, graph_seed)
    n = gso.n_nodes
    H = 0.5 * (np.eye(n) + _normalized(gso))
    spectrum = expected_sq_jacobian(make_two_layer(H, int(params.get("width", n))))
    eigvals, eigvecs = np.linalg.eigh(H)
    k = int(params.get("k", 4))
    V_k = eigvecs[:, np.argsort(-eigvals, kind="stable")[:k]]
    return {"alignment": eigen_alignment(V_k, spectrum.leading(k))}


def trial_agss_recovery(setup, seq) -> Dict[str, float]:
    """Seed recovery from aggregation samples at one node."""
    graph_seed, data_seed, noise_seed = seq.spawn(3)
    params = _params(setup)
    gso = _graph(setup, graph_seed)
    n = gso.n_nodes
    rng = np.random.default_rng(data_seed)
    sparsity = int(_signal_params(setup).get("sparsity", 2))
    seeds = np.zeros(n)
    support = rng.choice(n, size=sparsity, replace=False)
    seeds[support] = rng.standard_normal(sparsity)
    coeffs = rng.standard_normal(int(params.get("order", 3)))
    estimate = run_recovery_scenario(
        params.get("scenario", "blind-sparse"),
        gso,
        seeds,
        coeffs,
        node_i=int(params.get("node", 0)),
        n_samples=int(params.get("n_samples", 8)),
        noise_var=float(params.get("noise_var", 0.0)),
        seed=noise_seed,
        gamma=float(params.get("gamma", 1e-3)),
    )
    recovered = seed_recovered(seeds, estimate, radius=float(params.get("radius", 0.1)))
    return {
        "recovery_rate": METRICS["recovery_rate"]([recovered]),
        "nerr:seeds": nerr(estimate.s_hat, seeds) if sparsity else float(np.linalg.norm(estimate.s_hat)),
    }


def trial_bandlimited_sampling(setup, seq) -> Dict[str, float]:
    """Bandlimited reconstruction from aggregation samples versus node samples."""
    graph_seed, signal_seed, pick_seed = seq.spawn(3)
    params = _params(setup)
    gso = _graph(setup, graph_seed)
    n = gso.n_nodes
    k = int(_signal_params(setup).get("bandwidth", 3))
    x = generate_signal(gso, "Bandlimited", {"bandwidth": k}, seed=signal_seed).X[:, 0]
    q = int(params.get("n_samples", k))
    node = int(params.get("node", 0))
    rows = np.arange(q)
    z_Q = build_aggregation(gso, x, node, rows).z_Q
    picked = np.sort(np.random.default_rng(pick_seed).choice(n, size=q, replace=False))
    return {
        "nmse:aggregation": nmse(aggregation_bandlimited_recover(gso, z_Q, node, rows, k), x),
        "nmse:selection": nmse(selection_sampling_recover(gso, x[picked], picked, k), x),
    }


def _rfi_instance(setup, seq, n_filters: int = 1):
    graph_seed, pert_seed, data_seed, noise_seed = seq.spawn(4)
    params = _params(setup)
    gso = _graph(setup, graph_seed)
    n = gso.n_nodes
    spec = PerturbationSpec.from_dict(setup.get("perturbation") or {"mode": "RatioRewire", "fraction": 0.1})
    s_bar, _ = perturb(gso, spec, seed=pert_seed)
    rng = np.random.default_rng(data_seed)
    order = int(params.get("order", 3))
    n_signals = int(_signal_params(setup).get("n_signals", 100))
    noise = float(params.get("noise_power", 0.0))
    noise_seeds = noise_seed.spawn(n_filters)
    S = np.asarray(gso.matrix)
    datasets, filters = [], []
    for k in range(n_filters):
        h = rng.standard_normal(order)
        H = filter_from_coeffs(h, S)
        X = rng.standard_normal((n, n_signals))
        Y = H @ X
        if noise > 0:
            Y = add_noise(Y, noise, seed=noise_seeds[k])
        datasets.append((X, Y))
        filters.append(H)
    return gso, s_bar, datasets, filters, order


def _rfi_problem(X, Y, s_bar, params, order) -> RfiProblem:
    return RfiProblem(
        X=X,
        Y=Y,
        S_bar=s_bar.matrix,
        lam=float(params.get("lam", 1.0)),
        beta=float(params.get("beta", 0.1)),
        gamma=float(params.get("gamma", 10.0)),
        delta1=float(params.get("delta", 1e-3)),
        delta2=float(params.get("delta", 1e-3)),
        order=order,
    )


def trial_rfi(setup, seq) -> Dict[str, float]:
    """Plain least-squares identification on S_bar versus robust identification."""
    params = _params(setup)
    gso, s_bar, datasets, filters, order = _rfi_instance(setup, seq)
    (X, Y), H = datasets[0], filters[0]
    fit = identify_filter_ls(s_bar, X, Y, order)
    results = {
        "nerr:H_fi": nerr(filter_from_coeffs(fit.coeffs, s_bar.matrix), H),
        "nerr:S_bar": nerr(s_bar, gso),
    }
    for algorithm in params.get("algorithms", ["Alg2"]):
        start = time.perf_counter()
        solution = rfi_solve(
            _rfi_problem(X, Y, s_bar, params, order),
            algorithm=algorithm,
            t_max=int(params.get("t_max", 10)),
            tau1=int(params.get("tau", 50)),
            tau2=int(params.get("tau", 50)),
        )
        results[f"wall_seconds:{algorithm}"] = METRICS["wall_seconds"](start)
        results[f"nerr:H_{algorithm}"] = nerr(solution.H, H)
        results[f"nerr:S_{algorithm}"] = nerr(solution.S, gso)
    return results


def trial_joint_rfi(setup, seq) -> Dict[str, float]:
    """K filters on one perturbed graph: joint versus separate robust identification."""
    params = _params(setup)
    n_filters = int(params.get("n_filters", 2))
    gso, s_bar, datasets, filters, order = _rfi_instance(setup, seq, n_filters)
    base = _rfi_problem(datasets[0][0], datasets[0][1], s_bar, params, order)
    t_max = int(params.get("t_max", 10))
    joint = joint_rfi_solve(datasets, base, t_max=t_max)
    separate = [
        rfi_solve(_rfi_problem(X, Y, s_bar, params, order), t_max=t_max).H for X, Y in datasets
    ]
    return {
        "nerr:H_joint": float(np.mean([nerr(Hh, H) for Hh, H in zip(joint.filters, filters)])),
        "nerr:H_separate": float(np.mean([nerr(Hh, H) for Hh, H in zip(separate, filters)])),
        "nerr:S_joint": nerr(joint.S, gso),
    }


def trial_joint_topo(setup, seq) -> Dict[str, float]:
    """Joint hidden-node topology inference versus the hidden-unaware ablation."""
    (instance_seed,) = seq.spawn(1)
    params = _params(setup)
    graph_params = setup["graph"].get("params", {})
    n_graphs = int(params.get("n_graphs", 3))
    n_samples = params.get("n_samples")
    instances = planted_joint_instance(
        int(graph_params.get("n_nodes", 20)),
        float(graph_params.get("p", 0.2)),
        n_graphs,
        int(params.get("n_hidden", 1)),
        rewire_fraction=float(params.get("rewire", 0.1)),
        seed=instance_seed,
        n_samples=None if n_samples is None else int(n_samples),
    )
    observations = [inst.observation for inst in instances]
    truths = [inst.S_O for inst in instances]
    weights = {key: params[key] for key in ("alpha", "beta", "gamma", "eta", "mu", "delta", "passes") if key in params}
    aware = JointTopoProblem(n_graphs, **weights)
    blind = JointTopoProblem(n_graphs, **{**weights, "gamma": 0.0, "eta": 0.0, "hidden_aware": False})
    if n_samples is not None:
        for problem in (aware, blind):
            problem.scale_mu_for_samples(int(n_samples), observations[0].n_observed)
    max_iter = int(params.get("max_iter", 5000))
    hidden = topo_joint_solve(aware, observations, max_iter=max_iter, raise_on_cap=False)
    no_hidden = topo_joint_solve(blind, observations, max_iter=max_iter, raise_on_cap=False)
    return {
        "joint_error:hidden": joint_error(hidden.S_list, truths),
        "joint_error:no_hidden": joint_error(no_hidden.S_list, truths),
        "support_fscore:hidden": float(np.mean([support_fscore(S, T) for S, T in zip(hidden.S_list, truths)])),
    }


@dataclass(frozen=True)
class TrialKind:
    run: Callable[[Dict[str, Any], np.random.SeedSequence], Dict[str, float]]
    metrics: Callable[[Dict[str, Any]], List[str]]
    algorithm_keys: frozenset


def _fixed(*names: str) -> Callable[[Dict[str, Any]], List[str]]:
    return lambda params: list(names)


def _rfi_metrics(params: Dict[str, Any]) -> List[str]:
    names = ["nerr:H_fi", "nerr:S_bar"]
    for algorithm in params.get("algorithms", ["Alg2"]):
        names += [f"wall_seconds:{algorithm}", f"nerr:H_{algorithm}", f"nerr:S_{algorithm}"]
    return names


_RFI_KEYS = {"order", "noise_power", "lam", "beta", "gamma", "delta", "t_max", "tau"}

TRIAL_KINDS: Dict[str, TrialKind] = {
    "identity": TrialKind(trial_identity, _fixed("nerr"), frozenset({"order"})),
    "denoise": TrialKind(
        trial_denoise,
        _fixed("nmse:best", "nmse:final", "nmse:noisy", "nmse:bandlimited", "best_epoch", "wall_seconds:fit"),
        frozenset({"noise", "width", "layers", "layer_sizes", "gamma", "epochs", "lr", "optimizer", "bandwidth"}),
    ),
    "alignment": TrialKind(trial_alignment, _fixed("alignment"), frozenset({"width", "k"})),
    "agss_recovery": TrialKind(
        trial_agss_recovery,
        _fixed("recovery_rate", "nerr:seeds"),
        frozenset({"scenario", "order", "node", "n_samples", "noise_var", "gamma", "radius"}),
    ),
    "bandlimited_sampling": TrialKind(
        trial_bandlimited_sampling, _fixed("nmse:aggregation", "nmse:selection"), frozenset({"n_samples", "node"})
    ),
    "rfi": TrialKind(trial_rfi, _rfi_metrics, frozenset(_RFI_KEYS | {"algorithms"})),
    "joint_rfi": TrialKind(
        trial_joint_rfi, _fixed("nerr:H_joint", "nerr:H_separate", "nerr:S_joint"), frozenset(_RFI_KEYS | {"n_filters"})
    ),
    "joint_topo": TrialKind(
        trial_joint_topo,
        _fixed("joint_error:hidden", "joint_error:no_hidden", "support_fscore:hidden"),
        frozenset({"n_graphs", "n_hidden", "n_samples", "rewire", "alpha", "beta", "gamma", "eta", "mu", "delta",
                   "passes", "max_iter"}),
    ),
}

# scenario names accepted by agss_recovery
RECOVERY_SCENARIOS = tuple(SCENARIOS)


# ---------------------------------------------------------------------------
# execution
# ---------------------------------------------------------------------------


def trial_seed(master: int, sweep_index: int, trial_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([master, sweep_index, trial_index])


def _run_trial(job: Tuple[str, Dict[str, Any], List[str], int, int, int]) -> List[Dict[str, Any]]:
    kind, setup, metrics, master, sweep_index, trial_index = job
    start = time.perf_counter()
    error = ""
    try:
        values = TRIAL_KINDS[kind].run(setup, trial_seed(master, sweep_index, trial_index))
    except Exception as exc:  # noqa: BLE001 - a failed trial becomes NaN rows
        logging.getLogger(__name__).warning("trial %d/%d failed: %s", sweep_index, trial_index, exc)
        values, error = {}, f"{type(exc).__name__}: {exc}"
    seconds = time.perf_counter() - start
    return [
        {
            "sweep_index": sweep_index,
            "trial": trial_index,
            "metric": metric,
            "value": float(values.get(metric, np.nan)),
            "seconds": seconds,
            "error": error,
        }
        for metric in metrics
    ]


class ResultTable:
    """Long-format trial results with median/mean/quartile aggregation."""

    def __init__(self, frame: pd.DataFrame, aggregate: str = "median"):
        self.frame = frame[RESULT_COLUMNS].reset_index(drop=True)
        self.aggregate = aggregate

    def __len__(self) -> int:
        return len(self.frame)

    def summary(self) -> pd.DataFrame:
        grouped = self.frame.groupby(["sweep", "metric"], sort=False)["value"]
        return pd.DataFrame(
            {
                "median": grouped.median(),
                "mean": grouped.mean(),
                "q25": grouped.quantile(0.25),
                "q75": grouped.quantile(0.75),
                "failures": grouped.apply(lambda v: int(v.isna().sum())),
            }
        ).reset_index()

    def pivot(self, statistic: Optional[str] = None) -> pd.DataFrame:
        """One row per sweep value, one column per metric."""
        statistic = statistic or self.aggregate
        return self.summary().pivot(index="sweep", columns="metric", values=statistic)

    def write(self, out_dir, name: str) -> Tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / f"{name}.csv"
        json_path = out_dir / f"{name}.summary.json"
        self.frame.to_csv(csv_path, index=False, float_format="%.17g")
        summary = self.summary()
        records = json.loads(summary.to_json(orient="records", double_precision=15))
        json_path.write_text(json.dumps({"aggregate": self.aggregate, "rows": records}, indent=2), encoding="utf-8")
        return csv_path, json_path


class ExperimentRunner:
    """Plans the trial jobs of one config, runs them and writes the table."""

    def __init__(self, config: ExperimentConfig, output_dir=None, jobs: Optional[int] = None,
                 seed: Optional[int] = None, verbose: bool = False):
        settings = get_settings()
        self.config = config
        self.output_dir = Path(output_dir or config.output.get("path") or settings.output_dir)
        self.jobs = jobs or settings.jobs or os.cpu_count() or 1
        if seed is not None:
            self.seed = seed
        elif settings.seed is not None:
            self.seed = settings.seed
        else:
            self.seed = config.seed
        self.verbose = verbose
        self.table: Optional[ResultTable] = None

    def _say(self, message: str) -> None:
        if self.verbose:
            print(message)

    def plan(self) -> List[Tuple]:
        metrics = self.config.metric_names()
        jobs = []
        for sweep_index, value in enumerate(self.config.sweep_values):
            setup = self.config.at_sweep(value)
            for trial_index in range(self.config.trials):
                jobs.append((self.config.kind, setup, metrics, self.seed, sweep_index, trial_index))
        self._say(f"✓ Planned {len(jobs)} trials ({len(self.config.sweep_values)} sweep values x {self.config.trials})")
        return jobs

    def run_trials(self, jobs: List[Tuple]) -> List[Dict[str, Any]]:
        rows: List[Dict[str, Any]] = []
        progress = dict(total=len(jobs), desc=self.config.name, disable=not self.verbose)
        if self.jobs > 1:
            with ProcessPoolExecutor(max_workers=self.jobs) as pool:
                for trial_rows in tqdm(pool.map(_run_trial, jobs), **progress):
                    rows.extend(trial_rows)
        else:
            for job in tqdm(jobs, **progress):
                rows.extend(_run_trial(job))
        return rows

    def collect(self, rows: List[Dict[str, Any]]) -> ResultTable:
        frame = pd.DataFrame(rows)
        frame = frame.sort_values(["sweep_index", "trial"], kind="stable")
        values = self.config.sweep_values
        frame.insert(0, "sweep", [values[i] for i in frame["sweep_index"]])
        failed = int((frame["error"] != "").sum())
        if failed:
            logger.warning("%d result rows come from failed trials", failed)
        return ResultTable(frame, self.config.aggregate)

    def run(self, write: bool = True) -> ResultTable:
        self._say(f"\n🚀 Running experiment {self.config.name} (seed {self.seed}, {self.jobs} worker(s))\n")
        self.table = self.collect(self.run_trials(self.plan()))
        if write:
            csv_path, json_path = self.table.write(self.output_dir, self.config.name)
            self._say(f"✓ Wrote {csv_path} and {json_path}")
        return self.table


def run_experiment(
    config: ExperimentConfig,
    output_dir=None,
    jobs: Optional[int] = None,
    seed: Optional[int] = None,
    write: bool = True,
    verbose: bool = False,
) -> ResultTable:
    """Run every (sweep value, trial) pair of ``config``; seed precedence is argument > RGSP_SEED > config."""
    return ExperimentRunner(config, output_dir, jobs, seed, verbose).run(write=write)
