"""RBF feature embeddings and feature-center selection.

Inputs are embedded as [1, k_1(x), ..., k_l(x)] with
k_s(x) = scale * exp(-lengthscale_s * ||x - center_s||^2). The leading
constant gives the classifier a bias weight. Lengthscales are stored per
center so that centers drawn from occupied space can use a different
kernel width than centers drawn at random.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = ["KernelModel", "featurize", "featurize_batch", "select_centers",
           "save_kernel_json", "load_kernel_json"]


@dataclass(frozen=True)
class KernelModel:
    """Fixed RBF feature map shared by every agent.

    Attributes
    ----------
    centers : array of shape (l, d)
    scale : float
        Peak kernel value, > 0.
    lengthscales : array of shape (l,)
        Squared-exponential decay rate per center, all > 0.
    """

    centers: np.ndarray
    scale: float
    lengthscales: np.ndarray

    def __post_init__(self):
        centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        ls = np.asarray(self.lengthscales, dtype=float).reshape(-1)
        if centers.shape[0] < 1:
            raise ValueError("at least one center is required")
        if ls.shape[0] != centers.shape[0]:
            raise ValueError("one lengthscale per center is required")
        if not np.all(ls > 0.0):
            raise ValueError("lengthscales must be positive")
        if not self.scale > 0.0:
            raise ValueError("scale must be positive")
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "lengthscales", ls)

    @property
    def n_centers(self) -> int:
        return self.centers.shape[0]

    @property
    def input_dim(self) -> int:
        return self.centers.shape[1]

    @property
    def feature_dim(self) -> int:
        """l + 1: kernel values plus the leading constant."""
        return self.n_centers + 1


def featurize(model: KernelModel, x) -> np.ndarray:
    """Embed a single point; entry 0 is exactly 1."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != model.input_dim:
        raise ValueError(f"point has dimension {x.shape[0]}, model expects {model.input_dim}")
    sq = np.sum((model.centers - x) ** 2, axis=1)
    out = np.empty(model.feature_dim)
    out[0] = 1.0
    out[1:] = model.scale * np.exp(-model.lengthscales * sq)
    return out


def featurize_batch(model: KernelModel, points) -> np.ndarray:
    """Embed an (n, d) array of points into an (n, l + 1) feature matrix."""
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        return np.zeros((0, model.feature_dim))
    pts = np.atleast_2d(pts)
    if pts.shape[1] != model.input_dim:
        raise ValueError(f"points have dimension {pts.shape[1]}, model expects {model.input_dim}")
    # ||x - c||^2 expanded to avoid an (n, l, d) intermediate
    sq = (
        np.sum(pts**2, axis=1)[:, None]
        - 2.0 * pts @ model.centers.T
        + np.sum(model.centers**2, axis=1)[None, :]
    )
    np.maximum(sq, 0.0, out=sq)
    feats = np.empty((pts.shape[0], model.feature_dim))
    feats[:, 0] = 1.0
    feats[:, 1:] = model.scale * np.exp(-model.lengthscales[None, :] * sq)
    return feats


def select_centers(
    points,
    labels,
    n_occupied: int,
    n_random: int,
    lengthscale_occupied: float,
    lengthscale_free: float,
    seed,
    scale: float = 1.0,
) -> KernelModel:
    """Draw kernel centers from a labeled point set, without replacement.

    `n_occupied` centers come from the occupied class (label 1) and get
    `lengthscale_occupied`; `n_random` more come from the remaining points
    regardless of class and get `lengthscale_free`. Deterministic for a
    fixed seed.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    labels = np.asarray(labels).reshape(-1)
    if pts.shape[0] != labels.shape[0]:
        raise ValueError("points and labels must have the same length")
    if n_occupied < 0 or n_random < 0 or n_occupied + n_random < 1:
        raise ValueError("need a positive total number of centers")
    rng = np.random.default_rng(seed)
    occupied_idx = np.nonzero(labels == 1)[0]
    if n_occupied > occupied_idx.shape[0]:
        raise ValueError(
            f"requested {n_occupied} occupied centers but only {occupied_idx.shape[0]} occupied points"
        )
    chosen_occ = rng.choice(occupied_idx, size=n_occupied, replace=False) if n_occupied else np.empty(0, dtype=int)
    remaining = np.setdiff1d(np.arange(pts.shape[0]), chosen_occ, assume_unique=False)
    if n_random > remaining.shape[0]:
        raise ValueError(f"requested {n_random} random centers but only {remaining.shape[0]} points remain")
    chosen_rnd = rng.choice(remaining, size=n_random, replace=False) if n_random else np.empty(0, dtype=int)
    centers = np.vstack([pts[chosen_occ], pts[chosen_rnd]]) if (n_occupied or n_random) else np.empty((0, pts.shape[1]))
    lengthscales = np.concatenate(
        [np.full(n_occupied, float(lengthscale_occupied)), np.full(n_random, float(lengthscale_free))]
    )
    return KernelModel(centers=centers, scale=float(scale), lengthscales=lengthscales)


def save_kernel_json(model: KernelModel, path) -> None:
    """Write {"scale", "centers", "lengthscales"}."""
    payload = {
        "scale": model.scale,
        "centers": model.centers.tolist(),
        "lengthscales": model.lengthscales.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_kernel_json(path) -> KernelModel:
    with open(path) as fh:
        payload = json.load(fh)
    return KernelModel(
        centers=np.asarray(payload["centers"], dtype=float),
        scale=float(payload["scale"]),
        lengthscales=np.asarray(payload["lengthscales"], dtype=float),
    )
