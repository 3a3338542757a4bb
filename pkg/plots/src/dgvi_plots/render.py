"""Render dgvi experiment exports into figures.

Pure renderer: every statistic is computed by the producing experiment;
this module only reads the documented CSV/JSON files and draws them.

Figure kinds
------------
map        occupancy-probability grid (grid.csv: x,y,prob);
           probability 0 is blue (free), 1 is red/orange (occupied).
curves     per-agent training curves (metrics.csv:
           round,agent,consensus_err,verif_bce,verif_acc,ms).
features   kernel-center means and variances (feature_stats.csv:
           cx,cy,mean,variance).
particles  fusion particle cloud with fitted and exact means
           (particles.json: particles, fitted_mean, conjugate_mean).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["PlotJob", "render", "KINDS"]

KINDS = ("map", "curves", "features", "particles")

# blue at 0 (free) through white to red/orange at 1 (occupied)
_MAP_CMAP = "coolwarm"


@dataclass(frozen=True)
class PlotJob:
    """One figure: input artifact paths, kind, output image path."""

    kind: str
    inputs: tuple[str, ...]
    out: str
    bounds: tuple[float, float, float, float] | None = None
    clim: tuple[float, float] = (0.0, 1.0)
    column: str = "verif_bce"
    log_scale: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; choose from {KINDS}")
        if len(self.inputs) < 1:
            raise ValueError("at least one input path is required")
        for path in self.inputs:
            if not Path(path).exists():
                raise ValueError(f"input does not exist: {path}")


def _read_csv_columns(path, required: tuple[str, ...]) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        names = reader.fieldnames or []
        for col in required:
            if col not in names:
                raise ValueError(f"{path}: missing column '{col}' (found {names})")
        rows = list(reader)
    out = {}
    for col in required:
        try:
            out[col] = np.array([float(r[col]) for r in rows])
        except (TypeError, ValueError) as exc:
            raise ValueError(f"{path}: column '{col}': {exc}") from exc
    return out


def render(job: PlotJob) -> Path:
    """Draw the figure and write it to job.out; returns the output path."""
    fig = _RENDERERS[job.kind](job)
    out = Path(job.out)
    fig.savefig(out, dpi=110)
    plt.close(fig)
    return out


def _render_map(job: PlotJob):
    data = _read_csv_columns(job.inputs[0], ("x", "y", "prob"))
    xs = np.unique(data["x"])
    ys = np.unique(data["y"])
    grid = np.full((ys.size, xs.size), np.nan)
    xi = np.searchsorted(xs, data["x"])
    yi = np.searchsorted(ys, data["y"])
    grid[yi, xi] = data["prob"]
    extent = job.bounds if job.bounds is not None else (xs.min(), xs.max(), ys.min(), ys.max())
    fig, ax = plt.subplots(figsize=(7, 5))
    im = ax.imshow(
        grid,
        origin="lower",
        extent=extent,
        cmap=_MAP_CMAP,
        vmin=job.clim[0],
        vmax=job.clim[1],
        aspect="auto",
    )
    fig.colorbar(im, ax=ax, label="occupancy probability")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title("predicted occupancy (blue free, red occupied)")
    return fig


def _render_curves(job: PlotJob):
    fig, ax = plt.subplots(figsize=(7, 5))
    for path in job.inputs:
        data = _read_csv_columns(path, ("round", "agent", job.column))
        agents = np.unique(data["agent"]).astype(int)
        for agent in agents:
            mask = data["agent"] == agent
            label = f"agent {agent}" if len(job.inputs) == 1 else f"{Path(path).stem} agent {agent}"
            ax.plot(data["round"][mask], data[job.column][mask], label=label)
    if job.log_scale:
        ax.set_yscale("log")
    ax.set_xlabel("round")
    ax.set_ylabel(job.column)
    ax.legend(fontsize=8)
    ax.set_title(f"{job.column} during training")
    return fig


def _render_features(job: PlotJob):
    data = _read_csv_columns(job.inputs[0], ("cx", "cy", "mean", "variance"))
    fig, axes = plt.subplots(1, 2, figsize=(11, 4.5), sharey=True)
    for ax, column, cmap in ((axes[0], "mean", "coolwarm"), (axes[1], "variance", "viridis")):
        sc = ax.scatter(data["cx"], data["cy"], c=data[column], cmap=cmap, s=22)
        fig.colorbar(sc, ax=ax, label=column)
        ax.set_xlabel("x [m]")
        ax.set_title(f"feature-weight {column}")
        if job.bounds is not None:
            ax.set_xlim(job.bounds[0], job.bounds[1])
            ax.set_ylim(job.bounds[2], job.bounds[3])
    axes[0].set_ylabel("y [m]")
    return fig


def _render_particles(job: PlotJob):
    path = job.inputs[0]
    with open(path) as fh:
        payload = json.load(fh)
    for key in ("particles", "fitted_mean"):
        if key not in payload:
            raise ValueError(f"{path}: missing key '{key}'")
    particles = np.asarray(payload["particles"], dtype=float)
    fitted = np.asarray(payload["fitted_mean"], dtype=float)
    fig, ax = plt.subplots(figsize=(6, 6))
    ax.scatter(particles[:, 0], particles[:, 1], s=3, alpha=0.25, label="resampled particles")
    ax.plot(*fitted[:2], marker="*", markersize=16, color="tab:red", linestyle="none", label="fitted mean")
    if "conjugate_mean" in payload:
        exact = np.asarray(payload["conjugate_mean"], dtype=float)
        ax.plot(*exact[:2], marker="x", markersize=12, color="black", linestyle="none", label="analytic mean")
    if job.bounds is not None:
        ax.set_xlim(job.bounds[0], job.bounds[1])
        ax.set_ylim(job.bounds[2], job.bounds[3])
    ax.set_aspect("equal")
    ax.legend(fontsize=8)
    ax.set_title("fusion posterior particles")
    return fig


_RENDERERS = {
    "map": _render_map,
    "curves": _render_curves,
    "features": _render_features,
    "particles": _render_particles,
}
