"""Information-form Gaussian beliefs and the algebra used to combine them.

Beliefs are parameterized by a mean vector and an information (inverse
covariance) matrix, because every update the inference engine performs is
additive in information space: geometric fusion is a weighted sum of
information matrices, and likelihood updates add (scaled) outer products.
The covariance is kept only as a lazily refreshed cache.

All values are immutable once constructed and safe to share across threads.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve, cholesky, solve_triangular

__all__ = [
    "GaussianBelief",
    "DiagGaussianBelief",
    "geometric_fuse",
    "geometric_fuse_diag",
    "rank1_inverse_update",
    "kl_gaussian",
    "sample_gaussian",
    "save_belief_json",
    "load_belief_json",
]

_SYM_RTOL = 1e-12
_CACHE_TOL = 1e-6


class BeliefError(ValueError):
    """Raised when a belief violates its construction invariants."""


def _as_symmetric(information: np.ndarray) -> np.ndarray:
    """Validate symmetry to relative tolerance and return a float copy."""
    omega = np.asarray(information, dtype=float)
    if omega.ndim != 2 or omega.shape[0] != omega.shape[1]:
        raise BeliefError(f"information matrix must be square, got shape {omega.shape}")
    scale = max(np.abs(omega).max(), 1.0)
    asym = np.abs(omega - omega.T).max()
    if asym > _SYM_RTOL * scale:
        raise BeliefError(f"information matrix asymmetry {asym:.3e} exceeds tolerance")
    return 0.5 * (omega + omega.T)


class GaussianBelief:
    """Gaussian density N(mean, information^-1) in information form.

    Parameters
    ----------
    mean : array of shape (d,)
    information : array of shape (d, d)
        Symmetric positive definite. Symmetry is checked on construction;
        positive definiteness is checked whenever a Cholesky factor is
        needed (covariance refresh, sampling, divergences).
    covariance : array of shape (d, d), optional
        Cache of information^-1. When supplied it must satisfy
        max|information @ covariance - I| <= 1e-6.
    """

    __slots__ = ("mean", "information", "_cov")

    def __init__(self, mean, information, covariance=None):
        mean = np.asarray(mean, dtype=float).reshape(-1)
        omega = _as_symmetric(information)
        if omega.shape[0] != mean.shape[0]:
            raise BeliefError(
                f"mean has length {mean.shape[0]} but information is {omega.shape[0]}x{omega.shape[0]}"
            )
        self.mean = mean
        self.information = omega
        if covariance is not None:
            covariance = np.asarray(covariance, dtype=float)
            resid = np.abs(omega @ covariance - np.eye(omega.shape[0])).max()
            if resid > _CACHE_TOL:
                raise BeliefError(f"covariance cache inconsistent with information: {resid:.3e}")
        self._cov = covariance

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def covariance(self) -> np.ndarray:
        """Inverse of the information matrix, computed once via Cholesky."""
        if self._cov is None:
            factor = cho_factor(self.information, lower=True)
            cov = cho_solve(factor, np.eye(self.dim))
            self._cov = 0.5 * (cov + cov.T)
        return self._cov

    def information_mean(self) -> np.ndarray:
        """Information-weighted mean (the quantity agents put on the wire)."""
        return self.information @ self.mean

    def cholesky_information(self) -> np.ndarray:
        """Lower Cholesky factor of the information matrix.

        Raises
        ------
        numpy.linalg.LinAlgError
            If the information matrix is not positive definite.
        """
        return cholesky(self.information, lower=True)

    def __repr__(self) -> str:
        return f"GaussianBelief(dim={self.dim})"


class DiagGaussianBelief:
    """Gaussian with a diagonal information matrix, stored as a vector.

    Used for large models where the full matrix is too expensive; every
    operation on the diagonal variant is elementwise.
    """

    __slots__ = ("mean", "info_diag")

    def __init__(self, mean, info_diag):
        mean = np.asarray(mean, dtype=float).reshape(-1)
        info_diag = np.asarray(info_diag, dtype=float).reshape(-1)
        if mean.shape != info_diag.shape:
            raise BeliefError("mean and info_diag must have the same length")
        if not np.all(info_diag > 0.0):
            raise BeliefError("info_diag entries must be strictly positive")
        self.mean = mean
        self.info_diag = info_diag

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def information_mean(self) -> np.ndarray:
        return self.info_diag * self.mean

    def __repr__(self) -> str:
        return f"DiagGaussianBelief(dim={self.dim})"


def _check_weights(weights, n: int) -> np.ndarray:
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.shape[0] != n:
        raise ValueError(f"{n} beliefs but {w.shape[0]} weights")
    if np.any(w < 0.0):
        raise ValueError("fusion weights must be nonnegative")
    if abs(w.sum() - 1.0) > 1e-9:
        raise ValueError(f"fusion weights must sum to 1, got {w.sum()!r}")
    return w


def geometric_fuse(beliefs: Sequence[GaussianBelief], weights) -> GaussianBelief:
    """Weighted geometric average of Gaussians, in information form.

    The fused information matrix is the weighted sum of the inputs'
    information matrices, and the fused mean solves

        fused_information @ fused_mean = sum_j w_j * information_j @ mean_j

    via a symmetric positive definite solve. A single belief with weight
    exactly 1 is returned unchanged (same object), which preserves its
    covariance cache.
    """
    if len(beliefs) == 0:
        raise ValueError("geometric_fuse requires at least one belief")
    w = _check_weights(weights, len(beliefs))
    if len(beliefs) == 1 and w[0] == 1.0:
        return beliefs[0]
    dim = beliefs[0].dim
    for b in beliefs:
        if b.dim != dim:
            raise ValueError("beliefs must share one dimension")
    omega = np.zeros((dim, dim))
    rhs = np.zeros(dim)
    for wj, b in zip(w, beliefs):
        omega += wj * b.information
        rhs += wj * b.information_mean()
    try:
        factor = cho_factor(omega, lower=True)
    except np.linalg.LinAlgError as exc:
        raise ValueError("fused information matrix is not positive definite") from exc
    mean = cho_solve(factor, rhs)
    return GaussianBelief(mean, omega)


def geometric_fuse_diag(beliefs: Sequence[DiagGaussianBelief], weights) -> DiagGaussianBelief:
    """Diagonal counterpart of :func:`geometric_fuse`; the solve is elementwise."""
    if len(beliefs) == 0:
        raise ValueError("geometric_fuse_diag requires at least one belief")
    w = _check_weights(weights, len(beliefs))
    if len(beliefs) == 1 and w[0] == 1.0:
        return beliefs[0]
    dim = beliefs[0].dim
    for b in beliefs:
        if b.dim != dim:
            raise ValueError("beliefs must share one dimension")
    stacked = np.stack([b.info_diag for b in beliefs])
    means = np.stack([b.mean for b in beliefs])
    info = w @ stacked
    rhs = w @ (stacked * means)
    if np.any(info <= 0.0):
        raise ValueError("fused diagonal information has nonpositive entries")
    return DiagGaussianBelief(rhs / info, info)


def rank1_inverse_update(covariance: np.ndarray, phi: np.ndarray, gamma: float) -> np.ndarray:
    """Inverse of (covariance^-1 + gamma * phi phi^T) without a dense inversion.

    Sherman-Morrison form: with s = covariance @ phi and
    c = 1 + gamma * phi^T s,

        result = covariance - (gamma / c) * s s^T

    The result is explicitly re-symmetrized so that rounding drift cannot
    accumulate over long update chains.
    """
    sigma = np.asarray(covariance, dtype=float)
    phi = np.asarray(phi, dtype=float).reshape(-1)
    if gamma < 0.0:
        raise ValueError("gamma must be nonnegative")
    if gamma == 0.0:
        return sigma.copy()
    s = sigma @ phi
    c = 1.0 + gamma * float(phi @ s)
    if c <= 0.0:
        raise ValueError("Woodbury scalar is nonpositive; covariance is not positive definite")
    out = sigma - (gamma / c) * np.outer(s, s)
    return 0.5 * (out + out.T)


def kl_gaussian(p: GaussianBelief, q: GaussianBelief) -> float:
    """KL divergence KL[p || q] between two information-form Gaussians."""
    if p.dim != q.dim:
        raise ValueError("beliefs must share one dimension")
    d = p.dim
    sigma_p = p.covariance
    delta = q.mean - p.mean
    trace = float(np.trace(q.information @ sigma_p))
    quad = float(delta @ (q.information @ delta))
    logdet_p = 2.0 * float(np.sum(np.log(np.diag(p.cholesky_information()))))
    logdet_q = 2.0 * float(np.sum(np.log(np.diag(q.cholesky_information()))))
    return max(0.0, 0.5 * (trace + quad - d + logdet_p - logdet_q))


def sample_gaussian(belief, count: int, seed) -> np.ndarray:
    """Draw `count` samples from a belief, deterministically per seed.

    Accepts either belief variant. Full beliefs are sampled through the
    information Cholesky factor (no explicit covariance needed).
    """
    if count <= 0:
        raise ValueError("count must be positive")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((count, belief.dim))
    if isinstance(belief, DiagGaussianBelief):
        return belief.mean + z / np.sqrt(belief.info_diag)
    ell = belief.cholesky_information()
    # information = L L^T, so L^-T z has covariance information^-1
    shifted = solve_triangular(ell, z.T, lower=True, trans="T").T
    return belief.mean + shifted


def save_belief_json(belief, path) -> None:
    """Write a belief snapshot: {"dim", "mean", "information"|"info_diag"}."""
    import json

    if isinstance(belief, DiagGaussianBelief):
        payload = {
            "dim": belief.dim,
            "mean": belief.mean.tolist(),
            "info_diag": belief.info_diag.tolist(),
        }
    else:
        payload = {
            "dim": belief.dim,
            "mean": belief.mean.tolist(),
            "information": belief.information.reshape(-1).tolist(),
        }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_belief_json(path):
    """Inverse of :func:`save_belief_json`; returns the matching belief type."""
    import json

    with open(path) as fh:
        payload = json.load(fh)
    dim = int(payload["dim"])
    mean = np.asarray(payload["mean"], dtype=float)
    if "info_diag" in payload:
        return DiagGaussianBelief(mean, np.asarray(payload["info_diag"], dtype=float))
    information = np.asarray(payload["information"], dtype=float).reshape(dim, dim)
    return GaussianBelief(mean, information)
