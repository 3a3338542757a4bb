"""Command-line entry point.

Subcommands: run, eval, verify, export, normalize-graph, convert-lidar.
Exit codes: 0 success, 1 validation error (bad flags, missing or invalid
files), 2 runtime error (including failed verification checks).
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .belief import load_belief_json
from .checks import run_checks
from .data import load_labeled_csv, load_scans_jsonl, lidar_scan_to_points, save_labeled_csv
from .features import load_kernel_json
from .network import load_graph_json, metropolis_weights, save_graph_json, sinkhorn_normalize
from .sim import ConfigError, ExperimentConfig, evaluate, export_feature_stats, export_grid, run_experiment

__all__ = ["cli", "main", "build_parser"]


class _UsageError(Exception):
    def __init__(self, parser: argparse.ArgumentParser, message: str):
        super().__init__(message)
        self.parser = parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(self, message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dgvi", description="Distributed Gaussian variational inference toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment config")
    p_run.add_argument("--config", required=True, help="experiment JSON file")
    p_run.add_argument("--seed", type=int, default=None, help="override run.seed")
    p_run.add_argument("--out", default=None, help="override export directory")
    p_run.add_argument("--threads", type=int, default=1, help="agent steps per round run on this many threads")

    p_eval = sub.add_parser("eval", help="evaluate a saved belief on a points CSV")
    p_eval.add_argument("--belief", required=True)
    p_eval.add_argument("--kernel", required=True)
    p_eval.add_argument("--data", required=True)

    p_verify = sub.add_parser("verify", help="run oracle verification suites")
    p_verify.add_argument("--suite", default="all", help="example1, quadrature, probit-mc, woodbury, conjugate-regression, sinkhorn or all")
    p_verify.add_argument("--seed", type=int, default=7)
    p_verify.add_argument("--out", default=None, help="write example1 particles JSON here")

    p_export = sub.add_parser("export", help="export a grid or feature stats from a saved belief")
    p_export.add_argument("--belief", required=True)
    p_export.add_argument("--kernel", required=True)
    p_export.add_argument("--kind", required=True, choices=["grid", "features"])
    p_export.add_argument("--out", required=True)
    p_export.add_argument("--bounds", type=float, nargs=4, metavar=("XMIN", "XMAX", "YMIN", "YMAX"))
    p_export.add_argument("--resolution", type=int, default=100)

    p_graph = sub.add_parser("normalize-graph", help="fill in doubly stochastic weights for a graph file")
    p_graph.add_argument("--in", dest="infile", required=True)
    p_graph.add_argument("--out", required=True)
    p_graph.add_argument("--tol", type=float, default=1e-10)
    p_graph.add_argument("--max-iter", type=int, default=10_000)

    p_lidar = sub.add_parser("convert-lidar", help="convert scans JSONL to a labeled points CSV")
    p_lidar.add_argument("--in", dest="infile", required=True)
    p_lidar.add_argument("--out", required=True)
    p_lidar.add_argument("--free-per-ray", type=int, default=4)
    p_lidar.add_argument("--hit-epsilon", type=float, default=1e-9)

    return parser


def _cmd_run(args) -> int:
    config = ExperimentConfig.from_json_file(args.config)
    result = run_experiment(config, out_dir=args.out, threads=args.threads, seed_override=args.seed)
    if result.test_accuracy:
        for i, (acc, bce) in enumerate(zip(result.test_accuracy, result.test_bce)):
            print(f"agent {i}: test accuracy {acc:.4f}, test bce {bce:.4f}")
    for kind, path in result.written.items():
        print(f"wrote {kind}: {path}")
    return 0


def _cmd_eval(args) -> int:
    belief = load_belief_json(args.belief)
    model = load_kernel_json(args.kernel)
    points = load_labeled_csv(args.data)
    acc, bce = evaluate(belief, model, points)
    print(f"accuracy {acc:.4f}")
    print(f"bce {bce:.4f}")
    return 0


def _cmd_verify(args) -> int:
    results = run_checks(suite=args.suite, seed=args.seed)
    width = max(len(r.name) for r in results)
    all_ok = True
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{r.name:<{width}}  value={r.value:.3e}  threshold={r.threshold:.1e}  {status}")
        if r.detail:
            print(f"{'':<{width}}  {r.detail}")
        all_ok &= r.passed
    if args.out is not None and args.suite in ("example1", "all"):
        _write_example1_particles(args.out, args.seed)
        print(f"wrote particles: {args.out}")
    if not all_ok:
        raise RuntimeError("one or more verification checks failed")
    return 0


def _write_example1_particles(path, seed: int) -> None:
    from .belief import GaussianBelief
    from .oracle import LinearGaussianModel, conjugate_fusion_posterior, particle_fusion_posterior

    angles = np.array([0.0, 0.5, 1.0, 1.5]) * np.pi
    priors = [GaussianBelief([np.cos(a), np.sin(a)], np.eye(2)) for a in angles]
    weights = np.full(4, 0.25)
    model = LinearGaussianModel(H=np.eye(2), obs_precision=np.eye(2))
    z = np.array([1.0, 1.0])
    exact = conjugate_fusion_posterior(priors, weights, model, z)
    particles, fitted = particle_fusion_posterior(priors, weights, model, z, 100_000, seed)
    payload = {
        "particles": particles[:5000].tolist(),
        "fitted_mean": fitted.mean.tolist(),
        "fitted_information": fitted.information.tolist(),
        "conjugate_mean": exact.mean.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def _cmd_export(args) -> int:
    belief = load_belief_json(args.belief)
    model = load_kernel_json(args.kernel)
    if args.kind == "grid":
        if args.bounds is None:
            raise ConfigError("--bounds is required for grid export")
        export_grid(belief, model, args.bounds, args.resolution, args.out)
    else:
        export_feature_stats(belief, model, args.out)
    print(f"wrote {args.kind}: {args.out}")
    return 0


def _cmd_normalize_graph(args) -> int:
    payload = load_graph_json(args.infile)
    n = int(payload["n"])
    if payload.get("weights") is not None:
        weights = sinkhorn_normalize(np.asarray(payload["weights"], dtype=float), tol=args.tol, max_iter=args.max_iter)
    elif n == 1:
        weights = metropolis_weights([], 1)
    else:
        weights = metropolis_weights(payload.get("edges", []), n)
    save_graph_json(args.out, n, weights.edges(), weights.matrix)
    print(f"wrote graph: {args.out}")
    return 0


def _cmd_convert_lidar(args) -> int:
    scans = load_scans_jsonl(args.infile)
    points = []
    for scan in scans:
        points.extend(lidar_scan_to_points(scan, args.free_per_ray, args.hit_epsilon))
    save_labeled_csv(points, args.out)
    print(f"wrote {len(points)} points: {args.out}")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "eval": _cmd_eval,
    "verify": _cmd_verify,
    "export": _cmd_export,
    "normalize-graph": _cmd_normalize_graph,
    "convert-lidar": _cmd_convert_lidar,
}


def cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        exc.parser.print_usage(sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - runtime failures map to exit 2
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli())
