"""Command-line front end: ``rgsp run|scenarios|validate|denoise|sample|rfi|topo``."""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from .agss_sampling import blind_sparse_recovery, observation_theta, observation_xi, recover_known_support
from .config import get_settings
from .errors import ConfigError, RgspError
from .experiments import builtin_scenarios, get_scenario, load_config, run_experiment
from .graph_core import Gso, GsoKind
from .matrix_io import read_matrix, write_matrix
from .robust_filter_id import RfiProblem, rfi_solve
from .topology_hidden import (
    HiddenObservation,
    JointTopoProblem,
    commutator_residual,
    joint_error,
    topo_joint_solve,
    topo_single_solve,
)
from .untrained_denoisers import fit_untrained, make_gcg, make_gdec

EXIT_OK = 0
EXIT_ERROR = 2
EXIT_CONFIG = 3


def _read_gso(path: str, kind: str) -> Gso:
    return Gso(read_matrix(path), GsoKind(kind))


def _resolve_config(ref: str):
    """A config path, or the name of a builtin scenario."""
    if Path(ref).exists():
        return load_config(ref)
    return get_scenario(ref)


def cmd_run(args) -> int:
    config = _resolve_config(args.config)
    print(f"✓ Loaded config {config.name} ({config.kind}, {len(config.sweep_values)} sweep values)")
    table = run_experiment(config, output_dir=args.out, jobs=args.jobs, seed=args.seed, verbose=True)
    failures = int((table.frame["error"] != "").sum())
    print(table.pivot().to_string())
    print(f"\n✅ {len(table)} result rows, {failures} from failed trials\n")
    return EXIT_OK


def cmd_scenarios(args) -> int:
    for config in builtin_scenarios():
        print(f"  {config.name:<8} v{config.version}  {config.kind:<20} {config.description}")
    return EXIT_OK


def cmd_validate(args) -> int:
    config = _resolve_config(args.config)
    print(f"✓ {config.name} is valid: metrics {', '.join(config.metric_names())}")
    return EXIT_OK


def cmd_denoise(args) -> int:
    gso = _read_gso(args.gso, args.kind)
    x = read_matrix(args.signal)[:, 0]
    widths = [args.width] * args.layers + [1]
    if args.arch == "GCG":
        shift = np.asarray(gso.matrix) / max(gso.spectral_norm(), 1e-12)
        arch = make_gcg(0.5 * (np.eye(gso.n_nodes) + shift), widths, seed=args.seed)
    else:
        n = gso.n_nodes
        sizes = [max(n // 8, 1), max(n // 4, 2), max(n // 2, 3), n]
        arch = make_gdec(gso, sizes, [args.width] * (len(sizes) - 1) + [1], seed=args.seed)
    output, trace = fit_untrained(
        arch, x, epochs=args.epochs, lr=args.lr, optimizer=args.optimizer, seed=args.seed, stopping=args.stopping
    )
    write_matrix(args.out, output[:, None])
    print(f"✓ Fitted {args.arch} for {trace.stopped_epoch} epochs, final loss {trace.loss[-1]:.4g}")
    print(f"✓ Wrote {args.out}")
    return EXIT_OK


def cmd_sample(args) -> int:
    gso = _read_gso(args.gso, args.kind)
    z_Q = read_matrix(args.samples)[:, 0]
    rows = np.arange(z_Q.size)
    if args.coeffs:
        obs = observation_xi(gso, args.node, read_matrix(args.coeffs).ravel())
    else:
        obs = observation_theta(gso, args.node)
    if args.support:
        support = [int(i) for i in args.support.split(",")]
        estimate = recover_known_support(obs, z_Q, rows, support)
    else:
        estimate = blind_sparse_recovery(obs, z_Q, rows, gamma=args.gamma, exact=args.exact, debias=True)
    write_matrix(args.out, estimate.s_hat[:, None])
    print(f"✓ Recovered seeds on support {estimate.support.tolist()}")
    print(f"✓ Wrote {args.out}")
    return EXIT_OK


def cmd_rfi(args) -> int:
    s_bar = read_matrix(args.gso)
    problem = RfiProblem(
        X=read_matrix(args.inputs),
        Y=read_matrix(args.outputs),
        S_bar=s_bar,
        lam=args.lam,
        beta=args.beta,
        gamma=args.gamma,
        order=args.order,
    )
    solution = rfi_solve(problem, algorithm=args.algorithm, t_max=args.t_max, tau1=args.tau, tau2=args.tau)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix(out / "H.csv", solution.H)
    write_matrix(out / "S.csv", np.asarray(solution.S.matrix))
    write_matrix(out / "coeffs.csv", solution.coeffs[:, None])
    solution.report.to_frame().to_csv(out / "report.csv", index=False)
    print(f"✓ {solution.report.iterations} outer iterations, final objective {solution.report.objective[-1]:.6g}")
    print(f"✓ Wrote H.csv, S.csv, coeffs.csv and report.csv to {out}")
    return EXIT_OK


def cmd_topo(args) -> int:
    observations = [HiddenObservation(C_O=read_matrix(p), n_hidden=args.hidden) for p in args.cov]
    if len(observations) == 1 and not args.joint:
        solution = topo_single_solve(
            observations[0],
            gamma=args.gamma,
            eps=args.eps,
            variant="ReweightedNuclear",
            passes=args.passes,
            mu=args.mu,
            hidden=args.hidden > 0,
            raise_on_cap=False,
        )
    else:
        problem = JointTopoProblem(
            len(observations), gamma=args.gamma, mu=args.mu, passes=args.passes, hidden_aware=args.hidden > 0
        )
        solution = topo_joint_solve(problem, observations, raise_on_cap=False)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = {
        "iterations": solution.report.iterations,
        "converged": solution.report.converged,
        "flags": solution.report.flags,
        "residuals": [
            commutator_residual(obs.C_O, S, P) for obs, S, P in zip(observations, solution.S_list, solution.P_list)
        ],
        "p_active_columns": [cols.tolist() for cols in solution.active_columns()],
    }
    if args.truth:
        report["joint_error"] = joint_error(solution.S_list, [read_matrix(p) for p in args.truth])
    for k, S in enumerate(solution.S_list):
        write_matrix(out / f"S_{k}.csv", S)
    (out / "report.json").write_text(json.dumps(report, indent=2), encoding="utf-8")
    print(f"✓ Inferred {len(solution.S_list)} graph(s) in {solution.report.iterations} ADMM iterations")
    print(f"✓ Wrote S_k.csv files and report.json to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rgsp", description="Robust graph signal processing experiments")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment config (path or builtin scenario name)")
    run.add_argument("config")
    run.add_argument("--out", default=None, help="output directory")
    run.add_argument("--jobs", type=int, default=None, help="worker processes (default: all cores; 1 runs serially)")
    run.add_argument("--seed", type=int, default=None, help="master seed override")
    run.set_defaults(func=cmd_run)

    sub.add_parser("scenarios", help="list builtin scenarios").set_defaults(func=cmd_scenarios)

    validate = sub.add_parser("validate", help="validate a config without running it")
    validate.add_argument("config")
    validate.set_defaults(func=cmd_validate)

    def graph_args(p):
        p.add_argument("--gso", required=True, help="shift operator matrix (CSV or .bin)")
        p.add_argument("--kind", default="Adjacency", choices=[k.value for k in GsoKind])

    denoise = sub.add_parser("denoise", help="denoise one signal with an untrained network")
    graph_args(denoise)
    denoise.add_argument("--signal", required=True)
    denoise.add_argument("--arch", choices=["GCG", "GDec"], default="GCG")
    denoise.add_argument("--width", type=int, default=64)
    denoise.add_argument("--layers", type=int, default=3)
    denoise.add_argument("--epochs", type=int, default=500)
    denoise.add_argument("--lr", type=float, default=0.005)
    denoise.add_argument("--optimizer", choices=["GD", "SGD", "Adam"], default="Adam")
    denoise.add_argument("--stopping", choices=["budget", "plateau"], default="budget")
    denoise.add_argument("--seed", type=int, default=0)
    denoise.add_argument("--out", required=True)
    denoise.set_defaults(func=cmd_denoise)

    sample = sub.add_parser("sample", help="recover sparse seeds from aggregation samples")
    graph_args(sample)
    sample.add_argument("--samples", required=True, help="first Q aggregation samples, one per row")
    sample.add_argument("--node", type=int, default=0)
    sample.add_argument("--coeffs", default=None, help="diffusing filter coefficients")
    sample.add_argument("--support", default=None, help="comma-separated known support")
    sample.add_argument("--gamma", type=float, default=1e-3)
    sample.add_argument("--exact", action="store_true", help="noiseless linear program")
    sample.add_argument("--out", required=True)
    sample.set_defaults(func=cmd_sample)

    rfi = sub.add_parser("rfi", help="robust filter identification")
    rfi.add_argument("--gso", required=True, help="perturbed shift operator")
    rfi.add_argument("--inputs", required=True)
    rfi.add_argument("--outputs", required=True)
    rfi.add_argument("--algorithm", choices=["Alg2", "Alg3"], default="Alg2")
    rfi.add_argument("--order", type=int, default=4)
    rfi.add_argument("--lam", type=float, default=1.0)
    rfi.add_argument("--beta", type=float, default=0.1)
    rfi.add_argument("--gamma", type=float, default=10.0)
    rfi.add_argument("--t-max", type=int, default=10)
    rfi.add_argument("--tau", type=int, default=50)
    rfi.add_argument("--out", required=True)
    rfi.set_defaults(func=cmd_rfi)

    topo = sub.add_parser("topo", help="topology inference with hidden nodes")
    topo.add_argument("--cov", nargs="+", required=True, help="observed covariance per graph")
    topo.add_argument("--truth", nargs="*", default=None)
    topo.add_argument("--hidden", type=int, default=1)
    topo.add_argument("--joint", action="store_true", help="joint solver even for one graph")
    topo.add_argument("--gamma", type=float, default=1.0)
    topo.add_argument("--mu", type=float, default=100.0)
    topo.add_argument("--eps", type=float, default=None, help="constraint radius (penalized when omitted)")
    topo.add_argument("--passes", type=int, default=3)
    topo.add_argument("--out", required=True)
    topo.set_defaults(func=cmd_topo)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = get_settings().log_level
    if args.verbose:
        level = "DEBUG" if args.verbose > 1 else "INFO"
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RgspError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
