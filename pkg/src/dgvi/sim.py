"""Synchronous multi-agent experiment engine and artifact exports.

A run loads a labeled point set, splits and partitions it across agents,
and then executes synchronous rounds: every agent snapshots its
in-neighbors' beliefs from the previous round boundary, fuses them with
its weight row, draws observations from its replay buffer, applies the
configured update, and publishes. All randomness flows from explicit
seeds, so a config determines every numeric output; agents may be stepped
concurrently without changing results because each owns its RNG and reads
only the round snapshot.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .belief import DiagGaussianBelief, GaussianBelief, save_belief_json
from .data import (
    LabeledPoint,
    ReplayBuffer,
    load_labeled_csv,
    partition_dataset,
    points_to_arrays,
    replay_draw,
    split_train_test_verify,
)
from .features import KernelModel, featurize_batch, save_kernel_json, select_centers
from .network import consensus_error, is_strongly_connected, weight_matrix_from_graph
from .vi import (
    ClassificationObservation,
    RegressionObservation,
    UpdateOptions,
    dgvi_classify_step,
    dgvi_regression_step,
    diag_dgvi_classify_step,
    predict_batch,
)

__all__ = [
    "ExperimentConfig",
    "AgentState",
    "RoundMessage",
    "MetricsRecord",
    "RunResult",
    "run_experiment",
    "evaluate",
    "export_grid",
    "export_feature_stats",
    "ConfigError",
]


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration."""


@dataclass(frozen=True)
class GraphSpec:
    n: int
    edges: list = field(default_factory=list)
    weights: list | None = None


@dataclass(frozen=True)
class KernelSpec:
    n_occupied: int
    n_random: int
    scale: float
    lengthscale_occupied: float
    lengthscale_free: float
    center_source: str
    seed: int


@dataclass(frozen=True)
class SplitSpec:
    train: float
    test: float
    verify: float
    mode: str = "random"
    verify_cap: int | None = None


@dataclass(frozen=True)
class ReplaySpec:
    ratio: float | None = 0.8
    capacity: int = 100_000


@dataclass(frozen=True)
class DataSpec:
    path: str
    split: SplitSpec
    seed: int
    partition: str = "contiguous_trajectory"
    replay: ReplaySpec = field(default_factory=ReplaySpec)


@dataclass(frozen=True)
class RunSpec:
    n_rounds: int
    seed: int
    obs_per_round: int = 1
    eval_every: int = 500
    identical_streams: bool = False


@dataclass(frozen=True)
class PriorSpec:
    information_scale: float = 1.0


@dataclass(frozen=True)
class GridSpec:
    bounds: tuple[float, float, float, float]
    resolution: int


@dataclass(frozen=True)
class ExportSpec:
    out_dir: str | None = None
    metrics: str = "metrics.csv"
    beliefs: bool = True
    feature_stats: bool = False
    grid: GridSpec | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description; see README for the JSON schema."""

    task: str
    representation: str
    graph: GraphSpec
    kernel: KernelSpec
    data: DataSpec
    run: RunSpec
    update: UpdateOptions = field(default_factory=UpdateOptions)
    prior: PriorSpec = field(default_factory=PriorSpec)
    obs_precision: float = 1.0
    export: ExportSpec = field(default_factory=ExportSpec)

    @staticmethod
    def from_dict(raw: dict, base_dir: str | Path = ".") -> "ExperimentConfig":
        try:
            return _parse_config(raw, Path(base_dir))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    @staticmethod
    def from_json_file(path) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        with open(path) as fh:
            raw = json.load(fh)
        return ExperimentConfig.from_dict(raw, base_dir=path.parent)


def _require(raw: dict, key: str, where: str):
    if key not in raw:
        raise ConfigError(f"missing required field '{key}' in {where}")
    return raw[key]


def _parse_config(raw: dict, base_dir: Path) -> ExperimentConfig:
    task = _require(raw, "task", "config")
    if task not in ("classify", "regress"):
        raise ConfigError(f"task must be 'classify' or 'regress', got {task!r}")
    representation = _require(raw, "representation", "config")
    if representation not in ("full", "diagonal"):
        raise ConfigError(f"representation must be 'full' or 'diagonal', got {representation!r}")
    if task == "regress" and representation != "full":
        raise ConfigError("regression runs require the full representation")

    g = _require(raw, "graph", "config")
    graph = GraphSpec(
        n=int(_require(g, "n", "graph")),
        edges=[[int(i), int(j)] for i, j in g.get("edges", [])],
        weights=g.get("weights"),
    )
    if graph.n < 1:
        raise ConfigError("graph.n must be at least 1")

    k = _require(raw, "kernel", "config")
    kernel = KernelSpec(
        n_occupied=int(k.get("n_occupied", 0)),
        n_random=int(_require(k, "n_random", "kernel")),
        scale=float(k.get("scale", 1.0)),
        lengthscale_occupied=float(k.get("lengthscale_occupied", k.get("lengthscale", 0.3))),
        lengthscale_free=float(k.get("lengthscale_free", k.get("lengthscale", 0.3))),
        center_source=str(k.get("center_source", "train")),
        seed=int(_require(k, "seed", "kernel")),
    )
    if kernel.center_source not in ("train", "test", "all"):
        raise ConfigError("kernel.center_source must be 'train', 'test' or 'all'")

    d = _require(raw, "data", "config")
    s = _require(d, "split", "data")
    split = SplitSpec(
        train=float(_require(s, "train", "data.split")),
        test=float(s.get("test", 0.0)),
        verify=float(s.get("verify", 0.0)),
        mode=str(s.get("mode", "random")),
        verify_cap=None if s.get("verify_cap") is None else int(s["verify_cap"]),
    )
    r = d.get("replay", {})
    replay = ReplaySpec(
        ratio=None if r.get("ratio", 0.8) is None else float(r.get("ratio", 0.8)),
        capacity=int(r.get("capacity", 100_000)),
    )
    path = Path(_require(d, "path", "data"))
    if not path.is_absolute():
        path = base_dir / path
    if not path.exists():
        raise ConfigError(f"data file not found: {path}")
    data = DataSpec(
        path=str(path),
        split=split,
        seed=int(_require(d, "seed", "data")),
        partition=str(d.get("partition", "contiguous_trajectory")),
        replay=replay,
    )

    rr = _require(raw, "run", "config")
    run = RunSpec(
        n_rounds=int(_require(rr, "n_rounds", "run")),
        seed=int(_require(rr, "seed", "run")),
        obs_per_round=int(rr.get("obs_per_round", 1)),
        eval_every=int(rr.get("eval_every", 500)),
        identical_streams=bool(rr.get("identical_streams", False)),
    )
    if run.n_rounds < 1:
        raise ConfigError("run.n_rounds must be at least 1")
    if run.obs_per_round < 1:
        raise ConfigError("run.obs_per_round must be at least 1")

    u = raw.get("update", {})
    update = UpdateOptions(
        xi=float(u.get("xi", 0.61)),
        mean_update_matrix=str(u.get("mean_update_matrix", "posterior_information")),
        likelihood_weight=float(u.get("likelihood_weight", 1.0)),
    )
    prior = PriorSpec(information_scale=float(raw.get("prior", {}).get("information_scale", 1.0)))
    if prior.information_scale <= 0.0:
        raise ConfigError("prior.information_scale must be positive")

    e = raw.get("export", {})
    grid = None
    if e.get("grid") is not None:
        gb = e["grid"]
        bounds = tuple(float(v) for v in _require(gb, "bounds", "export.grid"))
        if len(bounds) != 4:
            raise ConfigError("export.grid.bounds must have 4 entries")
        grid = GridSpec(bounds=bounds, resolution=int(_require(gb, "resolution", "export.grid")))
        if grid.resolution < 2:
            raise ConfigError("export.grid.resolution must be at least 2")
    export = ExportSpec(
        out_dir=e.get("out_dir"),
        metrics=str(e.get("metrics", "metrics.csv")),
        beliefs=bool(e.get("beliefs", True)),
        feature_stats=bool(e.get("feature_stats", False)),
        grid=grid,
    )

    return ExperimentConfig(
        task=task,
        representation=representation,
        graph=graph,
        kernel=kernel,
        data=data,
        run=run,
        update=update,
        prior=prior,
        obs_precision=float(raw.get("regression", {}).get("obs_precision", 1.0)),
        export=export,
    )


@dataclass
class AgentState:
    """Mutable per-agent state owned by the engine."""

    id: int
    belief: GaussianBelief | DiagGaussianBelief
    buffer: ReplayBuffer
    rng: np.random.Generator
    stream: list[LabeledPoint]
    stream_pos: int = 0

    def ingest(self, count: int) -> None:
        end = min(self.stream_pos + count, len(self.stream))
        for idx in range(self.stream_pos, end):
            self.buffer.add(self.stream[idx])
        self.stream_pos = end


@dataclass(frozen=True)
class RoundMessage:
    """Wire content of one-hop exchange: information and info-weighted mean.

    Fusion is linear in exactly these two quantities. In-process the
    engine shares immutable belief snapshots directly; this type defines
    what would cross a real transport and round-trips through beliefs.
    """

    sender: int
    information: np.ndarray
    information_mean: np.ndarray

    def __post_init__(self):
        if not (np.all(np.isfinite(self.information)) and np.all(np.isfinite(self.information_mean))):
            raise ValueError("round messages must have finite entries")

    @staticmethod
    def from_belief(sender: int, belief) -> "RoundMessage":
        if isinstance(belief, DiagGaussianBelief):
            return RoundMessage(sender, belief.info_diag, belief.information_mean())
        return RoundMessage(sender, belief.information, belief.information_mean())

    def to_belief(self):
        if self.information.ndim == 1:
            return DiagGaussianBelief(self.information_mean / self.information, self.information)
        mean = np.linalg.solve(self.information, self.information_mean)
        return GaussianBelief(mean, self.information)


@dataclass(frozen=True)
class MetricsRecord:
    round: int
    agent: int
    consensus_err: float
    verif_bce: float
    verif_acc: float
    ms: float


@dataclass
class RunResult:
    beliefs: list
    model: KernelModel
    metrics: list[MetricsRecord]
    consensus_history: np.ndarray
    test_accuracy: list[float]
    test_bce: list[float]
    written: dict = field(default_factory=dict)


def evaluate(belief, model: KernelModel, points) -> tuple[float, float]:
    """(accuracy, binary cross-entropy) of probit predictions on `points`."""
    if len(points) == 0:
        raise ValueError("cannot evaluate on an empty point set")
    xs, ys = points_to_arrays(points)
    probs = np.clip(predict_batch(belief, model, xs), 1e-12, 1.0 - 1e-12)
    accuracy = float(np.mean((probs >= 0.5).astype(int) == ys))
    bce = float(-np.mean(ys * np.log(probs) + (1 - ys) * np.log(1.0 - probs)))
    return accuracy, bce


def _evaluate_regression(belief, model: KernelModel, points) -> tuple[float, float]:
    """Regression analogue: linear mean prediction clipped into (0, 1)."""
    if len(points) == 0:
        raise ValueError("cannot evaluate on an empty point set")
    xs, ys = points_to_arrays(points)
    preds = featurize_batch(model, xs) @ belief.mean
    probs = np.clip(preds, 1e-12, 1.0 - 1e-12)
    accuracy = float(np.mean((probs >= 0.5).astype(int) == ys))
    bce = float(-np.mean(ys * np.log(probs) + (1 - ys) * np.log(1.0 - probs)))
    return accuracy, bce


def export_grid(belief, model: KernelModel, bounds, resolution: int, path) -> None:
    """Probability field on a regular grid, CSV rows `x,y,prob`.

    Rows are emitted row-major with x varying fastest: resolution^2 rows
    covering [xmin, xmax] x [ymin, ymax] inclusive of endpoints.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    xmin, xmax, ymin, ymax = (float(v) for v in bounds)
    xs = np.linspace(xmin, xmax, resolution)
    ys = np.linspace(ymin, ymax, resolution)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    probs = predict_batch(belief, model, pts)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "prob"])
        for (px, py), pr in zip(pts, probs):
            writer.writerow([repr(float(px)), repr(float(py)), repr(float(pr))])


def export_feature_stats(belief, model: KernelModel, path) -> None:
    """Per-center CSV `cx,cy,mean,variance` (constant feature excluded)."""
    if isinstance(belief, DiagGaussianBelief):
        variances = 1.0 / belief.info_diag[1:]
    else:
        variances = np.diag(belief.covariance)[1:]
    means = belief.mean[1:]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cx", "cy", "mean", "variance"])
        for center, mu, var in zip(model.centers, means, variances):
            writer.writerow([repr(float(center[0])), repr(float(center[1])), repr(float(mu)), repr(float(var))])


def _build_model(config: ExperimentConfig, train, test) -> KernelModel:
    source = {"train": train, "test": test, "all": train + test}[config.kernel.center_source]
    if len(source) == 0:
        raise ConfigError(f"center source '{config.kernel.center_source}' is empty under the configured split")
    xs, ys = points_to_arrays(source)
    return select_centers(
        xs,
        ys,
        n_occupied=config.kernel.n_occupied,
        n_random=config.kernel.n_random,
        lengthscale_occupied=config.kernel.lengthscale_occupied,
        lengthscale_free=config.kernel.lengthscale_free,
        seed=config.kernel.seed,
        scale=config.kernel.scale,
    )


def _initial_belief(config: ExperimentConfig, dim: int):
    lam = config.prior.information_scale
    if config.representation == "diagonal":
        return DiagGaussianBelief(np.zeros(dim), np.full(dim, lam))
    return GaussianBelief(np.zeros(dim), lam * np.eye(dim), covariance=np.eye(dim) / lam)


def _agent_step(agent: AgentState, snapshot, weights_row, model, config: ExperimentConfig):
    neighbors = np.nonzero(weights_row > 0.0)[0]
    nbr_beliefs = [snapshot[j] for j in neighbors]
    weights = weights_row[neighbors]
    draws = replay_draw(agent.buffer, config.run.obs_per_round, agent.rng)
    belief = agent.belief
    for pos, point in enumerate(draws):
        beliefs = nbr_beliefs if pos == 0 else [belief]
        w = weights if pos == 0 else [1.0]
        if config.task == "regress":
            obs = RegressionObservation(
                x=np.asarray(point.x), y=[float(point.y)], precision=[[config.obs_precision]]
            )
            belief = dgvi_regression_step(beliefs, w, obs, model, config.update)
        elif config.representation == "diagonal":
            obs = ClassificationObservation(x=np.asarray(point.x), y=point.y)
            belief = diag_dgvi_classify_step(beliefs, w, obs, model, config.update)
        else:
            obs = ClassificationObservation(x=np.asarray(point.x), y=point.y)
            belief = dgvi_classify_step(beliefs, w, obs, model, config.update)
    agent.belief = belief


def run_experiment(
    config: ExperimentConfig,
    out_dir: str | Path | None = None,
    threads: int = 1,
    seed_override: int | None = None,
) -> RunResult:
    """Execute a configured run; fully deterministic given the config.

    `seed_override` replaces run.seed; `out_dir` overrides the export
    directory. Errors during a round are re-raised with the offending
    round and agent identified.
    """
    if seed_override is not None:
        config = ExperimentConfig(
            task=config.task,
            representation=config.representation,
            graph=config.graph,
            kernel=config.kernel,
            data=config.data,
            run=RunSpec(
                n_rounds=config.run.n_rounds,
                seed=int(seed_override),
                obs_per_round=config.run.obs_per_round,
                eval_every=config.run.eval_every,
                identical_streams=config.run.identical_streams,
            ),
            update=config.update,
            prior=config.prior,
            obs_precision=config.obs_precision,
            export=config.export,
        )

    points = load_labeled_csv(config.data.path)
    split_ss, part_ss = np.random.SeedSequence(config.data.seed).spawn(2)
    train, test, verify = split_train_test_verify(
        points,
        (config.data.split.train, config.data.split.test, config.data.split.verify),
        mode=config.data.split.mode,
        seed=split_ss,
        verify_cap=config.data.split.verify_cap,
    )
    if len(train) == 0:
        raise ConfigError("training split is empty")
    n = config.graph.n
    parts = partition_dataset(train, n, config.data.partition, seed=part_ss)
    model = _build_model(config, train, test)

    weights = weight_matrix_from_graph(
        {"n": n, "edges": config.graph.edges, "weights": config.graph.weights}
    )
    if n > 1 and not is_strongly_connected(weights):
        raise ConfigError("communication graph is not strongly connected")

    dim = model.feature_dim
    agents = []
    for i in range(n):
        entropy = (config.run.seed,) if config.run.identical_streams else (config.run.seed, i)
        agents.append(
            AgentState(
                id=i,
                belief=_initial_belief(config, dim),
                buffer=ReplayBuffer(config.data.replay.capacity, config.data.replay.ratio),
                rng=np.random.default_rng(np.random.SeedSequence(entropy)),
                stream=parts[i],
            )
        )

    eval_fn = _evaluate_regression if config.task == "regress" else evaluate
    metrics: list[MetricsRecord] = []
    consensus_history = np.zeros((config.run.n_rounds, n))
    started = time.perf_counter()
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for rnd in range(1, config.run.n_rounds + 1):
            # beliefs are immutable, so holding references is a snapshot
            snapshot_beliefs = [a.belief for a in agents]

            def step(agent: AgentState):
                try:
                    _agent_step(agent, snapshot_beliefs, weights.row(agent.id), model, config)
                except Exception as exc:
                    raise RuntimeError(f"round {rnd}, agent {agent.id}: {exc}") from exc

            for agent in agents:
                agent.ingest(config.run.obs_per_round)
            if pool is not None:
                list(pool.map(step, agents))
            else:
                for agent in agents:
                    step(agent)

            cerr = consensus_error([a.belief.mean for a in agents])
            consensus_history[rnd - 1] = cerr
            if rnd % config.run.eval_every == 0 or rnd == config.run.n_rounds:
                elapsed_ms = (time.perf_counter() - started) * 1000.0
                for agent in agents:
                    if len(verify) > 0:
                        acc, bce = eval_fn(agent.belief, model, verify)
                    else:
                        acc, bce = float("nan"), float("nan")
                    metrics.append(
                        MetricsRecord(
                            round=rnd,
                            agent=agent.id,
                            consensus_err=float(cerr[agent.id]),
                            verif_bce=bce,
                            verif_acc=acc,
                            ms=elapsed_ms,
                        )
                    )
    finally:
        if pool is not None:
            pool.shutdown()

    test_accuracy, test_bce = [], []
    if len(test) > 0:
        for agent in agents:
            acc, bce = eval_fn(agent.belief, model, test)
            test_accuracy.append(acc)
            test_bce.append(bce)

    result = RunResult(
        beliefs=[a.belief for a in agents],
        model=model,
        metrics=metrics,
        consensus_history=consensus_history,
        test_accuracy=test_accuracy,
        test_bce=test_bce,
    )

    target_dir = out_dir if out_dir is not None else config.export.out_dir
    if target_dir is not None:
        _write_artifacts(result, config, Path(target_dir))
    return result


def _write_artifacts(result: RunResult, config: ExperimentConfig, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics_path = out_dir / config.export.metrics
    with open(metrics_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["round", "agent", "consensus_err", "verif_bce", "verif_acc", "ms"])
        for rec in result.metrics:
            writer.writerow(
                [rec.round, rec.agent, repr(rec.consensus_err), repr(rec.verif_bce), repr(rec.verif_acc), repr(rec.ms)]
            )
    result.written["metrics"] = str(metrics_path)

    save_kernel_json(result.model, out_dir / "kernel.json")
    result.written["kernel"] = str(out_dir / "kernel.json")

    if config.export.beliefs:
        for i, belief in enumerate(result.beliefs):
            path = out_dir / f"belief_agent{i}.json"
            save_belief_json(belief, path)
            result.written[f"belief_{i}"] = str(path)

    if config.export.grid is not None and config.task == "classify":
        path = out_dir / "grid.csv"
        export_grid(result.beliefs[0], result.model, config.export.grid.bounds, config.export.grid.resolution, path)
        result.written["grid"] = str(path)

    if config.export.feature_stats:
        path = out_dir / "feature_stats.csv"
        export_feature_stats(result.beliefs[0], result.model, path)
        result.written["feature_stats"] = str(path)

    summary = {
        "rounds": config.run.n_rounds,
        "agents": config.graph.n,
        "test_accuracy": result.test_accuracy,
        "test_bce": result.test_bce,
    }
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
    result.written["summary"] = str(out_dir / "summary.json")
