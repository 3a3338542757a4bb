"""Streaming Gaussian variational updates for classification and regression.

Each step fuses the neighborhood's beliefs geometrically and then folds in
one observation through closed-form approximations of the expected
log-likelihood gradient and Hessian. For binary labels the sigmoid
likelihood is handled with the probit surrogate

    sigmoid(u) ~= Phi(xi * u),   xi = 0.61,

whose Gaussian expectations are analytic: with m = phi' mu,
v = phi' Sigma phi and beta = 1 + xi^2 v,

    E[sigmoid(phi' theta)]  ~= Phi(xi m / sqrt(beta))
    E[Hessian of log-lik]   ~= -gamma * phi phi'
    gamma = sqrt(xi^2 / (2 pi beta)) * exp(-xi^2 m^2 / (2 beta)).

The information matrix therefore grows by a nonnegative rank-1 term per
observation, and its inverse is maintained with a rank-1 Woodbury update
instead of a dense inversion.

For the linear-Gaussian regression likelihood the gradient and Hessian are
exact, so a single-agent step reproduces the conjugate Bayesian posterior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtr

from .belief import (
    DiagGaussianBelief,
    GaussianBelief,
    geometric_fuse,
    geometric_fuse_diag,
    rank1_inverse_update,
)
from .features import KernelModel, featurize, featurize_batch

__all__ = [
    "ClassificationObservation",
    "RegressionObservation",
    "UpdateOptions",
    "expected_sigmoid",
    "expected_loglik_gradient",
    "hessian_scale",
    "dgvi_classify_step",
    "diag_dgvi_classify_step",
    "dgvi_regression_step",
    "gvi_classify_step",
    "predict_batch",
]

MEAN_UPDATE_CHOICES = ("posterior_information", "fused_prior_information")

_P_LO = 1e-300
_P_HI = float(np.nextafter(1.0, 0.0))


@dataclass(frozen=True)
class ClassificationObservation:
    """One labeled input (x, y) with binary y."""

    x: np.ndarray
    y: int

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float).reshape(-1))
        if self.y not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.y!r}")


@dataclass(frozen=True)
class RegressionObservation:
    """One regression pair (x, y) with observation precision S (m x m SPD)."""

    x: np.ndarray
    y: np.ndarray
    precision: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float).reshape(-1))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float).reshape(-1))
        s = np.asarray(self.precision, dtype=float)
        if s.ndim == 0:
            s = s.reshape(1, 1)
        if s.shape != (self.y.shape[0], self.y.shape[0]):
            raise ValueError("precision must be m x m for an m-vector y")
        if np.abs(s - s.T).max() > 1e-10 * max(1.0, np.abs(s).max()):
            raise ValueError("precision must be symmetric")
        try:
            np.linalg.cholesky(s)
        except np.linalg.LinAlgError as exc:
            raise ValueError("precision must be positive definite") from exc
        object.__setattr__(self, "precision", s)


@dataclass(frozen=True)
class UpdateOptions:
    """Knobs shared by every update rule.

    xi : probit surrogate constant.
    mean_update_matrix : which inverse information scales the mean
        innovation. "posterior_information" uses the post-update inverse;
        "fused_prior_information" uses the fused prior's.
    likelihood_weight : scales the likelihood term (gradient and Hessian),
        e.g. n to weigh a shared likelihood once per agent.
    """

    xi: float = 0.61
    mean_update_matrix: str = "posterior_information"
    likelihood_weight: float = 1.0

    def __post_init__(self):
        if not self.xi > 0.0:
            raise ValueError("xi must be positive")
        if self.mean_update_matrix not in MEAN_UPDATE_CHOICES:
            raise ValueError(f"mean_update_matrix must be one of {MEAN_UPDATE_CHOICES}")
        if not self.likelihood_weight > 0.0:
            raise ValueError("likelihood_weight must be positive")


def _resolve_phi(model, x, phi, dim: int) -> np.ndarray:
    if phi is None:
        if model is None:
            raise ValueError("either a kernel model or an explicit phi is required")
        phi = featurize(model, x)
    else:
        phi = np.asarray(phi, dtype=float).reshape(-1)
    if phi.shape[0] != dim:
        raise ValueError(f"feature vector has length {phi.shape[0]}, beliefs have dimension {dim}")
    return phi


def _projection_moments(belief, phi_matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean and variance of phi' theta for each row of phi_matrix."""
    means = phi_matrix @ belief.mean
    if isinstance(belief, DiagGaussianBelief):
        variances = (phi_matrix**2 / belief.info_diag).sum(axis=1)
    else:
        variances = np.einsum("ij,ij->i", phi_matrix @ belief.covariance, phi_matrix)
    return means, np.maximum(variances, 0.0)


def _probit_probabilities(means, variances, xi: float) -> np.ndarray:
    beta = 1.0 + xi**2 * variances
    probs = ndtr(xi * means / np.sqrt(beta))
    return np.clip(probs, _P_LO, _P_HI)


def expected_sigmoid(belief, phi, xi: float = 0.61) -> float:
    """Expected class-1 probability of the probit-surrogate likelihood.

    Accepts full or diagonal beliefs; result lies strictly inside (0, 1).
    """
    phi = np.asarray(phi, dtype=float).reshape(1, -1)
    if phi.shape[1] != belief.dim:
        raise ValueError(f"phi has length {phi.shape[1]}, belief has dimension {belief.dim}")
    m, v = _projection_moments(belief, phi)
    return float(_probit_probabilities(m, v, xi)[0])


def expected_loglik_gradient(belief, phi, y: int, xi: float = 0.61) -> np.ndarray:
    """(y - expected_sigmoid) * phi, the expected log-likelihood gradient."""
    phi = np.asarray(phi, dtype=float).reshape(-1)
    return (y - expected_sigmoid(belief, phi, xi)) * phi


def hessian_scale(belief, phi, xi: float = 0.61) -> float:
    """Scalar gamma >= 0 such that the expected Hessian is -gamma * phi phi'.

    gamma = sqrt(xi^2 / (2 pi beta)) * exp(-xi^2 (phi' mu)^2 / (2 beta)),
    which lies in (0, xi / sqrt(2 pi)] and underflows to 0 for very
    confident projections; that underflow is a valid no-op update.
    """
    phi = np.asarray(phi, dtype=float).reshape(1, -1)
    if phi.shape[1] != belief.dim:
        raise ValueError(f"phi has length {phi.shape[1]}, belief has dimension {belief.dim}")
    m, v = _projection_moments(belief, phi)
    beta = 1.0 + xi**2 * v[0]
    return math.sqrt(xi**2 / (2.0 * math.pi * beta)) * math.exp(-0.5 * xi**2 * m[0] ** 2 / beta)


def dgvi_classify_step(
    beliefs: Sequence[GaussianBelief],
    weights,
    obs: ClassificationObservation,
    model: KernelModel | None = None,
    opts: UpdateOptions = UpdateOptions(),
    phi=None,
) -> GaussianBelief:
    """One full-covariance classification round for a single agent.

    Fuses the neighborhood beliefs with the given weight row, then applies
    the probit-approximate likelihood update for `obs`. The posterior
    covariance is produced by a rank-1 Woodbury correction of the fused
    covariance, never by dense inversion.

    `phi` can be passed explicitly to bypass the kernel embedding.
    """
    fused = geometric_fuse(beliefs, weights)
    phi = _resolve_phi(model, obs.x, phi, fused.dim)
    xi = opts.xi
    sigma_g = fused.covariance
    s = sigma_g @ phi
    m = float(phi @ fused.mean)
    v = max(float(phi @ s), 0.0)
    beta = 1.0 + xi**2 * v
    gamma = math.sqrt(xi**2 / (2.0 * math.pi * beta)) * math.exp(-0.5 * xi**2 * m**2 / beta)
    gamma_w = opts.likelihood_weight * gamma

    omega_next = fused.information + gamma_w * np.outer(phi, phi)
    omega_next = 0.5 * (omega_next + omega_next.T)
    sigma_next = rank1_inverse_update(sigma_g, phi, gamma_w)

    residual = obs.y - float(np.clip(ndtr(xi * m / math.sqrt(beta)), _P_LO, _P_HI))
    gain = sigma_next if opts.mean_update_matrix == "posterior_information" else sigma_g
    mean_next = fused.mean + opts.likelihood_weight * residual * (gain @ phi)
    return GaussianBelief(mean_next, omega_next, covariance=sigma_next)


def gvi_classify_step(
    belief: GaussianBelief,
    obs: ClassificationObservation,
    model: KernelModel,
    opts: UpdateOptions = UpdateOptions(),
) -> GaussianBelief:
    """Centralized special case: one agent, weight [1]."""
    return dgvi_classify_step([belief], [1.0], obs, model, opts)


def diag_dgvi_classify_step(
    beliefs: Sequence[DiagGaussianBelief],
    weights,
    obs: ClassificationObservation,
    model: KernelModel | None = None,
    opts: UpdateOptions = UpdateOptions(),
    phi=None,
) -> DiagGaussianBelief:
    """Diagonal-information variant of :func:`dgvi_classify_step`.

    Every operation is elementwise, so the cost per step is linear in the
    feature dimension. Diagonal entries never decrease relative to the
    fused prior because the Hessian term adds gamma * phi_k^2 >= 0.
    """
    fused = geometric_fuse_diag(beliefs, weights)
    phi = _resolve_phi(model, obs.x, phi, fused.dim)
    xi = opts.xi
    d_g = fused.info_diag
    m = float(phi @ fused.mean)
    v = float((phi**2 / d_g).sum())
    beta = 1.0 + xi**2 * v
    gamma = math.sqrt(xi**2 / (2.0 * math.pi * beta)) * math.exp(-0.5 * xi**2 * m**2 / beta)
    gamma_w = opts.likelihood_weight * gamma

    d_next = d_g + gamma_w * phi**2
    residual = obs.y - float(np.clip(ndtr(xi * m / math.sqrt(beta)), _P_LO, _P_HI))
    denom = d_next if opts.mean_update_matrix == "posterior_information" else d_g
    mean_next = fused.mean + opts.likelihood_weight * residual * phi / denom
    return DiagGaussianBelief(mean_next, d_next)


def dgvi_regression_step(
    beliefs: Sequence[GaussianBelief],
    weights,
    obs: RegressionObservation,
    model: KernelModel | None = None,
    opts: UpdateOptions = UpdateOptions(),
    phi=None,
) -> GaussianBelief:
    """One linear-Gaussian regression round.

    The likelihood gradient and Hessian are exact here, so with a single
    agent this is the conjugate Bayesian update: information grows by
    Phi S Phi' and the information-weighted mean by Phi S y.

    `phi` may be given explicitly as a (d, m) design matrix for
    multivariate targets; otherwise it is the kernel embedding of `obs.x`
    (requiring scalar y).
    """
    fused = geometric_fuse(beliefs, weights)
    s_mat = obs.precision
    m_out = obs.y.shape[0]
    if phi is None:
        if model is None:
            raise ValueError("either a kernel model or an explicit phi is required")
        if m_out != 1:
            raise ValueError("kernel features support scalar targets; pass phi for multivariate y")
        phi = featurize(model, obs.x).reshape(-1, 1)
    else:
        phi = np.asarray(phi, dtype=float)
        if phi.ndim == 1:
            phi = phi.reshape(-1, 1)
        if phi.shape != (fused.dim, m_out):
            raise ValueError(f"phi must have shape ({fused.dim}, {m_out}), got {phi.shape}")

    sigma_g = fused.covariance
    omega_next = fused.information + phi @ s_mat @ phi.T
    omega_next = 0.5 * (omega_next + omega_next.T)
    # m x m Woodbury: only the observation-space system is inverted
    sp = sigma_g @ phi
    inner = np.linalg.inv(s_mat) + phi.T @ sp
    sigma_next = sigma_g - sp @ np.linalg.solve(inner, sp.T)
    sigma_next = 0.5 * (sigma_next + sigma_next.T)

    innovation = phi @ (s_mat @ (obs.y - phi.T @ fused.mean))
    mean_next = fused.mean + sigma_next @ innovation
    return GaussianBelief(mean_next, omega_next, covariance=sigma_next)


def predict_batch(belief, model: KernelModel, points, xi: float = 0.61) -> np.ndarray:
    """Expected class-1 probability for each point, vectorized.

    Identical, entry for entry, to calling :func:`expected_sigmoid` on
    each point's features (both share one code path).
    """
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        return np.zeros(0)
    phi_matrix = featurize_batch(model, pts)
    m, v = _projection_moments(belief, phi_matrix)
    return _probit_probabilities(m, v, xi)
