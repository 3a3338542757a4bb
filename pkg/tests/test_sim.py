import csv
import json

import numpy as np
import pytest

from dgvi.belief import DiagGaussianBelief, GaussianBelief, load_belief_json
from dgvi.data import save_labeled_csv
from dgvi.features import KernelModel, featurize
from dgvi.sim import (
    ConfigError,
    ExperimentConfig,
    MetricsRecord,
    RoundMessage,
    evaluate,
    export_feature_stats,
    export_grid,
    run_experiment,
)
from dgvi.synth import make_banana_dataset
from dgvi.vi import expected_sigmoid

from conftest import random_belief


@pytest.fixture(scope="module")
def banana_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "banana.csv"
    save_labeled_csv(make_banana_dataset(800, seed=0), path)
    return path


def base_config(banana_csv, **overrides):
    raw = {
        "task": "classify",
        "representation": "diagonal",
        "graph": {"n": 4, "edges": [[0, 1], [1, 2], [2, 3], [3, 0]]},
        "kernel": {"n_random": 15, "scale": 1.0, "lengthscale": 0.3, "seed": 11},
        "data": {
            "path": str(banana_csv),
            "split": {"train": 0.6, "test": 0.3, "verify": 0.1, "mode": "random"},
            "seed": 5,
            "partition": "contiguous_trajectory",
            "replay": {"ratio": None, "capacity": 5000},
        },
        "run": {"n_rounds": 200, "seed": 7, "eval_every": 50},
    }
    raw.update(overrides)
    return raw


class TestConfigValidation:
    def test_parses_complete_config(self, banana_csv):
        config = ExperimentConfig.from_dict(base_config(banana_csv))
        assert config.graph.n == 4
        assert config.update.xi == 0.61

    def test_missing_seed_rejected(self, banana_csv):
        raw = base_config(banana_csv)
        del raw["run"]["seed"]
        with pytest.raises(ConfigError, match="seed"):
            ExperimentConfig.from_dict(raw)

    def test_missing_data_file_rejected(self, banana_csv):
        raw = base_config(banana_csv)
        raw["data"]["path"] = "/nonexistent/points.csv"
        with pytest.raises(ConfigError, match="not found"):
            ExperimentConfig.from_dict(raw)

    def test_bad_task_rejected(self, banana_csv):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(base_config(banana_csv, task="cluster"))

    def test_nonpositive_rounds_rejected(self, banana_csv):
        raw = base_config(banana_csv)
        raw["run"]["n_rounds"] = 0
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(raw)

    def test_from_json_file_missing(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            ExperimentConfig.from_json_file(tmp_path / "nope.json")


class TestRunExperiment:
    def test_small_run_produces_metrics(self, banana_csv):
        config = ExperimentConfig.from_dict(base_config(banana_csv))
        result = run_experiment(config)
        assert len(result.beliefs) == 4
        # one record per (eval round, agent)
        assert len(result.metrics) == 4 * 4
        assert all(isinstance(m, MetricsRecord) for m in result.metrics)
        assert len(result.test_accuracy) == 4
        assert result.consensus_history.shape == (200, 4)

    def test_deterministic_rerun(self, banana_csv):
        config = ExperimentConfig.from_dict(base_config(banana_csv))
        r1 = run_experiment(config)
        r2 = run_experiment(config)
        for b1, b2 in zip(r1.beliefs, r2.beliefs):
            np.testing.assert_array_equal(b1.mean, b2.mean)
            np.testing.assert_array_equal(b1.info_diag, b2.info_diag)
        # every metrics column except wall-clock ms is identical
        for m1, m2 in zip(r1.metrics, r2.metrics):
            assert (m1.round, m1.agent, m1.consensus_err, m1.verif_bce, m1.verif_acc) == (
                m2.round,
                m2.agent,
                m2.consensus_err,
                m2.verif_bce,
                m2.verif_acc,
            )

    def test_thread_count_does_not_change_results(self, banana_csv):
        config = ExperimentConfig.from_dict(base_config(banana_csv))
        r1 = run_experiment(config, threads=1)
        r4 = run_experiment(config, threads=4)
        for b1, b4 in zip(r1.beliefs, r4.beliefs):
            np.testing.assert_array_equal(b1.mean, b4.mean)
            np.testing.assert_array_equal(b1.info_diag, b4.info_diag)

    def test_identical_streams_zero_consensus_error(self, banana_csv):
        raw = base_config(banana_csv)
        raw["data"]["partition"] = "replicate"
        raw["run"]["identical_streams"] = True
        result = run_experiment(ExperimentConfig.from_dict(raw))
        assert result.consensus_history.max() <= 1e-12

    def test_seed_override_changes_stream(self, banana_csv):
        config = ExperimentConfig.from_dict(base_config(banana_csv))
        r1 = run_experiment(config)
        r2 = run_experiment(config, seed_override=99)
        assert not np.array_equal(r1.beliefs[0].mean, r2.beliefs[0].mean)

    def test_full_representation_single_agent(self, banana_csv):
        raw = base_config(banana_csv, representation="full", graph={"n": 1, "edges": []})
        result = run_experiment(ExperimentConfig.from_dict(raw))
        assert isinstance(result.beliefs[0], GaussianBelief)
        assert result.test_accuracy[0] > 0.5

    def test_regression_task_runs(self, banana_csv):
        raw = base_config(banana_csv, task="regress", representation="full", graph={"n": 1, "edges": []})
        raw["regression"] = {"obs_precision": 2.0}
        result = run_experiment(ExperimentConfig.from_dict(raw))
        assert result.test_accuracy[0] > 0.5

    def test_exports_written(self, banana_csv, tmp_path):
        raw = base_config(banana_csv)
        raw["export"] = {
            "metrics": "metrics.csv",
            "beliefs": True,
            "feature_stats": True,
            "grid": {"bounds": [-3, 3, -3, 3], "resolution": 5},
        }
        result = run_experiment(ExperimentConfig.from_dict(raw), out_dir=tmp_path)
        with open(result.written["metrics"]) as fh:
            header = fh.readline().strip()
        assert header == "round,agent,consensus_err,verif_bce,verif_acc,ms"
        belief = load_belief_json(result.written["belief_0"])
        assert isinstance(belief, DiagGaussianBelief)
        with open(result.written["grid"]) as fh:
            assert len(fh.readlines()) == 1 + 25
        assert (tmp_path / "summary.json").exists()
        with open(tmp_path / "summary.json") as fh:
            summary = json.load(fh)
        assert summary["agents"] == 4

    def test_disconnected_graph_rejected(self, banana_csv):
        raw = base_config(banana_csv, graph={"n": 4, "edges": [[0, 1]]})
        with pytest.raises((ConfigError, ValueError)):
            run_experiment(ExperimentConfig.from_dict(raw))


class TestEvaluate:
    def test_zero_mean_gives_log2_bce(self, rng, banana_csv):
        from dgvi.data import load_labeled_csv

        points = load_labeled_csv(banana_csv)[:100]
        model = KernelModel(centers=[[0.0, 0.0]], scale=1.0, lengthscales=[0.3])
        belief = GaussianBelief(np.zeros(2), np.eye(2))
        acc, bce = evaluate(belief, model, points)
        np.testing.assert_allclose(bce, np.log(2.0), rtol=1e-12)

    def test_saturated_predictor_accuracy_one(self):
        from dgvi.data import LabeledPoint

        model = KernelModel(centers=[[0.0, 0.0]], scale=1.0, lengthscales=[0.5])
        # large positive weight on the kernel, negative bias: near points
        # predict 1, far points predict 0
        belief = GaussianBelief([-40.0, 100.0], 1e6 * np.eye(2))
        points = [LabeledPoint((0.0, 0.0), 1), LabeledPoint((5.0, 5.0), 0)]
        acc, _ = evaluate(belief, model, points)
        assert acc == 1.0

    def test_matches_hand_rolled_loop(self, rng):
        from dgvi.data import LabeledPoint

        model = KernelModel(centers=rng.standard_normal((3, 2)), scale=1.0, lengthscales=np.full(3, 0.4))
        belief = random_belief(rng, 4)
        points = [LabeledPoint(tuple(rng.standard_normal(2)), int(rng.integers(0, 2))) for _ in range(40)]
        acc, bce = evaluate(belief, model, points)
        correct, losses = 0, []
        for p in points:
            prob = min(max(expected_sigmoid(belief, featurize(model, p.x)), 1e-12), 1 - 1e-12)
            correct += int((prob >= 0.5) == p.y)
            losses.append(-(p.y * np.log(prob) + (1 - p.y) * np.log(1 - prob)))
        np.testing.assert_allclose(acc, correct / 40)
        np.testing.assert_allclose(bce, np.mean(losses), rtol=1e-12)

    def test_empty_rejected(self, rng):
        model = KernelModel(centers=[[0.0, 0.0]], scale=1.0, lengthscales=[0.3])
        with pytest.raises(ValueError):
            evaluate(random_belief(rng, 2), model, [])


class TestExports:
    def test_grid_resolution_two_corners(self, tmp_path, rng):
        model = KernelModel(centers=[[0.0, 0.0]], scale=1.0, lengthscales=[0.3])
        belief = GaussianBelief(np.zeros(2), np.eye(2))
        path = tmp_path / "grid.csv"
        export_grid(belief, model, (-1, 1, -2, 2), 2, path)
        rows = list(csv.DictReader(open(path)))
        assert len(rows) == 4
        coords = [(float(r["x"]), float(r["y"])) for r in rows]
        assert coords == [(-1.0, -2.0), (1.0, -2.0), (-1.0, 2.0), (1.0, 2.0)]

    def test_grid_zero_mean_all_half(self, tmp_path):
        model = KernelModel(centers=[[0.0, 0.0]], scale=1.0, lengthscales=[0.3])
        belief = GaussianBelief(np.zeros(2), np.eye(2))
        path = tmp_path / "grid.csv"
        export_grid(belief, model, (0, 1, 0, 1), 3, path)
        rows = list(csv.DictReader(open(path)))
        assert all(float(r["prob"]) == 0.5 for r in rows)

    def test_grid_matches_predict_batch(self, tmp_path, rng):
        from dgvi.vi import predict_batch

        model = KernelModel(centers=rng.standard_normal((4, 2)), scale=1.0, lengthscales=np.full(4, 0.5))
        belief = random_belief(rng, 5)
        path = tmp_path / "grid.csv"
        export_grid(belief, model, (-2, 2, -2, 2), 4, path)
        rows = list(csv.DictReader(open(path)))
        pts = np.array([[float(r["x"]), float(r["y"])] for r in rows])
        probs = np.array([float(r["prob"]) for r in rows])
        np.testing.assert_array_equal(probs, predict_batch(belief, model, pts))

    def test_feature_stats_diag_variance(self, tmp_path):
        model = KernelModel(centers=[[0.0, 0.0], [1.0, 1.0]], scale=1.0, lengthscales=[0.3, 0.3])
        belief = DiagGaussianBelief([0.1, 0.2, 0.3], [1.0, 2.0, 4.0])
        path = tmp_path / "stats.csv"
        export_feature_stats(belief, model, path)
        rows = list(csv.DictReader(open(path)))
        assert len(rows) == 2  # constant feature excluded
        np.testing.assert_allclose([float(r["variance"]) for r in rows], [0.5, 0.25])
        np.testing.assert_allclose([float(r["mean"]) for r in rows], [0.2, 0.3])

    def test_feature_stats_full_matches_dense_inverse(self, tmp_path, rng):
        model = KernelModel(centers=rng.standard_normal((4, 2)), scale=1.0, lengthscales=np.full(4, 0.5))
        belief = random_belief(rng, 5)
        path = tmp_path / "stats.csv"
        export_feature_stats(belief, model, path)
        rows = list(csv.DictReader(open(path)))
        direct = np.diag(np.linalg.inv(belief.information))[1:]
        np.testing.assert_allclose([float(r["variance"]) for r in rows], direct, atol=1e-8)


class TestRoundMessage:
    def test_roundtrip_full(self, rng):
        belief = random_belief(rng, 3)
        msg = RoundMessage.from_belief(0, belief)
        back = msg.to_belief()
        np.testing.assert_allclose(back.mean, belief.mean, atol=1e-12)
        np.testing.assert_array_equal(back.information, belief.information)

    def test_roundtrip_diag(self):
        belief = DiagGaussianBelief([1.0, -2.0], [2.0, 0.5])
        back = RoundMessage.from_belief(1, belief).to_belief()
        np.testing.assert_allclose(back.mean, belief.mean)
        np.testing.assert_array_equal(back.info_diag, belief.info_diag)

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            RoundMessage(0, np.array([np.inf]), np.array([1.0]))
