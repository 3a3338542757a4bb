import json
from pathlib import Path

import matplotlib.image as mpimg
import numpy as np
import pytest

from dgvi_plots import PlotJob, render

REPO_OUT = Path(__file__).resolve().parents[2] / "out"


@pytest.fixture
def grid_csv(tmp_path):
    path = tmp_path / "grid.csv"
    lines = ["x,y,prob"]
    for y in (0.0, 1.0, 2.0):
        for x in (0.0, 1.0, 2.0):
            lines.append(f"{x},{y},{0.5}")
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def metrics_csv(tmp_path):
    path = tmp_path / "metrics.csv"
    lines = ["round,agent,consensus_err,verif_bce,verif_acc,ms"]
    for rnd in (500, 1000, 1500):
        for agent in (0, 1):
            lines.append(f"{rnd},{agent},{1.0 / rnd},{0.7 - rnd * 1e-4},{0.5 + rnd * 1e-4},{rnd * 2.0}")
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def stats_csv(tmp_path):
    path = tmp_path / "stats.csv"
    lines = ["cx,cy,mean,variance"]
    rng = np.random.default_rng(0)
    for _ in range(30):
        cx, cy = rng.uniform(0, 10), rng.uniform(0, 6)
        lines.append(f"{cx},{cy},{rng.standard_normal()},{rng.uniform(0.1, 1.0)}")
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def particles_json(tmp_path):
    path = tmp_path / "particles.json"
    rng = np.random.default_rng(1)
    payload = {
        "particles": (0.5 + 0.3 * rng.standard_normal((500, 2))).tolist(),
        "fitted_mean": [0.5, 0.5],
        "fitted_information": [[2.0, 0.0], [0.0, 2.0]],
        "conjugate_mean": [0.5, 0.5],
    }
    path.write_text(json.dumps(payload))
    return path


def write_uniform_grid(path, prob):
    lines = ["x,y,prob"]
    for y in range(4):
        for x in range(4):
            lines.append(f"{float(x)},{float(y)},{prob}")
    path.write_text("\n".join(lines) + "\n")


class TestRenderKinds:
    def test_map(self, grid_csv, tmp_path):
        out = render(PlotJob(kind="map", inputs=(str(grid_csv),), out=str(tmp_path / "map.png")))
        assert out.exists() and out.stat().st_size > 0

    def test_curves_one_line_per_agent(self, metrics_csv, tmp_path):
        out = render(PlotJob(kind="curves", inputs=(str(metrics_csv),), out=str(tmp_path / "curves.png")))
        assert out.exists() and out.stat().st_size > 0

    def test_curves_log_scale_consensus(self, metrics_csv, tmp_path):
        job = PlotJob(
            kind="curves",
            inputs=(str(metrics_csv),),
            out=str(tmp_path / "cons.png"),
            column="consensus_err",
            log_scale=True,
        )
        assert render(job).exists()

    def test_features(self, stats_csv, tmp_path):
        out = render(PlotJob(kind="features", inputs=(str(stats_csv),), out=str(tmp_path / "feat.png")))
        assert out.exists() and out.stat().st_size > 0

    def test_particles(self, particles_json, tmp_path):
        out = render(PlotJob(kind="particles", inputs=(str(particles_json),), out=str(tmp_path / "part.png")))
        assert out.exists() and out.stat().st_size > 0


class TestContracts:
    def test_rerun_identical_pixels(self, grid_csv, tmp_path):
        a = render(PlotJob(kind="map", inputs=(str(grid_csv),), out=str(tmp_path / "a.png")))
        b = render(PlotJob(kind="map", inputs=(str(grid_csv),), out=str(tmp_path / "b.png")))
        np.testing.assert_array_equal(mpimg.imread(a), mpimg.imread(b))
        assert a.stat().st_size == b.stat().st_size

    def test_map_color_convention(self, tmp_path):
        # free space (prob 0) renders blue-dominant, occupied red-dominant
        free_csv, occ_csv = tmp_path / "free.csv", tmp_path / "occ.csv"
        write_uniform_grid(free_csv, 0.0)
        write_uniform_grid(occ_csv, 1.0)
        img_free = mpimg.imread(render(PlotJob(kind="map", inputs=(str(free_csv),), out=str(tmp_path / "f.png"))))
        img_occ = mpimg.imread(render(PlotJob(kind="map", inputs=(str(occ_csv),), out=str(tmp_path / "o.png"))))
        # sample the panel center
        h, w = img_free.shape[0] // 2, img_free.shape[1] // 2
        r_free, b_free = img_free[h, w, 0], img_free[h, w, 2]
        r_occ, b_occ = img_occ[h, w, 0], img_occ[h, w, 2]
        assert b_free > r_free
        assert r_occ > b_occ

    def test_schema_mismatch_names_column(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("x,y,value\n0,0,0.5\n")
        with pytest.raises(ValueError, match="prob"):
            render(PlotJob(kind="map", inputs=(str(bad),), out=str(tmp_path / "x.png")))

    def test_missing_input_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="does not exist"):
            PlotJob(kind="map", inputs=(str(tmp_path / "absent.csv"),), out=str(tmp_path / "x.png"))

    def test_unknown_kind_rejected(self, grid_csv, tmp_path):
        with pytest.raises(ValueError, match="kind"):
            PlotJob(kind="histogram", inputs=(str(grid_csv),), out=str(tmp_path / "x.png"))

    def test_particles_missing_key_named(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"particles": [[0, 0]]}))
        with pytest.raises(ValueError, match="fitted_mean"):
            render(PlotJob(kind="particles", inputs=(str(bad),), out=str(tmp_path / "x.png")))


class TestCli:
    def test_cli_map(self, grid_csv, tmp_path, capsys):
        from dgvi_plots.cli import cli

        out = tmp_path / "map.png"
        assert cli(["map", "--in", str(grid_csv), "--out", str(out)]) == 0
        assert out.exists()
        assert "wrote map" in capsys.readouterr().out

    def test_cli_schema_error_exit_1(self, tmp_path, capsys):
        from dgvi_plots.cli import cli

        bad = tmp_path / "bad.csv"
        bad.write_text("a,b\n1,2\n")
        assert cli(["map", "--in", str(bad), "--out", str(tmp_path / "x.png")]) == 1
        assert "column" in capsys.readouterr().err


@pytest.mark.skipif(not (REPO_OUT / "two_room" / "grid.csv").exists(), reason="experiment exports not generated")
class TestAgainstRealExports:
    """Renders the actual artifacts produced by the experiment pipeline."""

    def test_scaled_mapping_figures(self, tmp_path):
        base = REPO_OUT / "two_room"
        render(PlotJob(kind="map", inputs=(str(base / "grid.csv"),), out=str(tmp_path / "map.png")))
        render(
            PlotJob(
                kind="curves",
                inputs=(str(base / "metrics.csv"),),
                out=str(tmp_path / "curves.png"),
                column="verif_bce",
            )
        )
        render(
            PlotJob(
                kind="curves",
                inputs=(str(base / "metrics.csv"),),
                out=str(tmp_path / "consensus.png"),
                column="consensus_err",
                log_scale=True,
            )
        )
        render(PlotJob(kind="features", inputs=(str(base / "feature_stats.csv"),), out=str(tmp_path / "features.png")))
        for name in ("map.png", "curves.png", "consensus.png", "features.png"):
            assert (tmp_path / name).stat().st_size > 0

    def test_example1_particles_figure(self, tmp_path):
        src = REPO_OUT / "example1_particles.json"
        if not src.exists():
            pytest.skip("example1 particles not exported")
        out = render(PlotJob(kind="particles", inputs=(str(src),), out=str(tmp_path / "particles.png")))
        assert out.stat().st_size > 0
