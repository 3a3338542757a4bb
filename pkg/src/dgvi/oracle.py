"""Independent reference computations used to verify the analytic updates.

Nothing in this module shares code with the update rules it checks: the
conjugate fusion posterior is a direct closed form, the particle fusion is
importance sampling with stratified resampling, and the probit moments are
computed by brute-force quadrature. The test suite and the CLI `verify`
subcommand compare these references against the fast paths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp, ndtr

from .belief import GaussianBelief

__all__ = [
    "LinearGaussianModel",
    "conjugate_fusion_posterior",
    "particle_fusion_posterior",
    "quadrature_probit_moments",
    "mc_expected_gradient",
]


@dataclass(frozen=True)
class LinearGaussianModel:
    """Observation z = H theta + noise with precision obs_precision."""

    H: np.ndarray
    obs_precision: np.ndarray

    def __post_init__(self):
        h = np.atleast_2d(np.asarray(self.H, dtype=float))
        prec = np.atleast_2d(np.asarray(self.obs_precision, dtype=float))
        if prec.shape[0] != prec.shape[1] or prec.shape[0] != h.shape[0]:
            raise ValueError("obs_precision must be m x m for an m x d observation matrix")
        if np.abs(prec - prec.T).max() > 1e-10 * max(1.0, np.abs(prec).max()):
            raise ValueError("obs_precision must be symmetric")
        object.__setattr__(self, "H", h)
        object.__setattr__(self, "obs_precision", prec)


def conjugate_fusion_posterior(priors, weights, model: LinearGaussianModel, z) -> GaussianBelief:
    """Exact posterior after geometric fusion with a linear-Gaussian likelihood.

        information = H' R H + sum_j w_j information_j
        information @ mean = H' R z + sum_j w_j information_j @ mean_j
    """
    z = np.asarray(z, dtype=float).reshape(-1)
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.shape[0] != len(priors):
        raise ValueError("one weight per prior is required")
    h, prec = model.H, model.obs_precision
    omega = h.T @ prec @ h
    rhs = h.T @ prec @ z
    for wj, p in zip(w, priors):
        omega = omega + wj * p.information
        rhs = rhs + wj * p.information_mean()
    omega = 0.5 * (omega + omega.T)
    mean = np.linalg.solve(omega, rhs)
    return GaussianBelief(mean, omega)


def _gaussian_logpdf(theta: np.ndarray, mean: np.ndarray, information: np.ndarray) -> np.ndarray:
    """Log density rows of theta under N(mean, information^-1)."""
    d = mean.shape[0]
    diff = theta - mean
    sign, logdet = np.linalg.slogdet(information)
    if sign <= 0:
        raise ValueError("information matrix must be positive definite")
    quad = np.einsum("ij,jk,ik->i", diff, information, diff)
    return 0.5 * (logdet - d * np.log(2.0 * np.pi) - quad)


def _stratified_resample(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One draw per equal-probability stratum of the cumulative weights."""
    n = weights.shape[0]
    positions = (np.arange(n) + rng.random(n)) / n
    cumulative = np.cumsum(weights)
    cumulative[-1] = 1.0
    return np.searchsorted(cumulative, positions)


def particle_fusion_posterior(
    priors,
    weights,
    model: LinearGaussianModel,
    z,
    n_particles: int,
    seed,
):
    """Sampling-based estimate of :func:`conjugate_fusion_posterior`.

    Particles are proposed from the equal-weight mixture of the priors,
    importance weighted by likelihood times the geometric prior average
    over the proposal density, stratified-resampled, and summarized by a
    moment-matched Gaussian.

    Returns (resampled particles, fitted GaussianBelief).
    """
    if n_particles < 1_000:
        raise ValueError("n_particles must be at least 1000")
    z = np.asarray(z, dtype=float).reshape(-1)
    w = np.asarray(weights, dtype=float).reshape(-1)
    rng = np.random.default_rng(seed)
    k = len(priors)
    d = priors[0].dim

    assignments = rng.integers(0, k, size=n_particles)
    theta = np.empty((n_particles, d))
    for idx, prior in enumerate(priors):
        rows = np.nonzero(assignments == idx)[0]
        if rows.size == 0:
            continue
        noise = rng.standard_normal((rows.size, d))
        ell = np.linalg.cholesky(prior.information)
        theta[rows] = prior.mean + np.linalg.solve(ell.T, noise.T).T

    component_logpdf = np.stack([_gaussian_logpdf(theta, p.mean, p.information) for p in priors])
    log_proposal = logsumexp(component_logpdf, axis=0) - np.log(k)
    log_geometric = w @ component_logpdf
    resid = z - theta @ model.H.T
    log_lik = -0.5 * np.einsum("ij,jk,ik->i", resid, model.obs_precision, resid)

    log_w = log_lik + log_geometric - log_proposal
    log_w -= logsumexp(log_w)
    weights_norm = np.exp(log_w)
    ess = 1.0 / float(np.sum(weights_norm**2))
    if ess < 10.0:
        raise RuntimeError(f"importance weights degenerate (effective sample size {ess:.2f})")

    particles = theta[_stratified_resample(weights_norm, rng)]
    mean = particles.mean(axis=0)
    centered = particles - mean
    cov = centered.T @ centered / n_particles
    cov = 0.5 * (cov + cov.T)
    information = np.linalg.inv(cov)
    fitted = GaussianBelief(mean, 0.5 * (information + information.T))
    return particles, fitted


def quadrature_probit_moments(
    mean_u: float,
    var_u: float,
    xi: float,
    half_width: float = 12.0,
    n_points: int = 20_001,
):
    """Brute-force E[Phi(xi u)] and E[xi phi(xi u)] for u ~ N(mean_u, var_u).

    Evaluated with the trapezoid rule on a uniform grid spanning
    `half_width` standard deviations; the integrands decay like a
    Gaussian, so refinement beyond the default grid changes the result by
    far less than 1e-9.
    """
    if var_u < 0.0:
        raise ValueError("var_u must be nonnegative")
    if var_u == 0.0:
        return float(ndtr(xi * mean_u)), float(xi * _std_normal_pdf(xi * mean_u))
    sd = np.sqrt(var_u)
    grid = np.linspace(mean_u - half_width * sd, mean_u + half_width * sd, n_points)
    density = _std_normal_pdf((grid - mean_u) / sd) / sd
    cdf_term = np.trapezoid(ndtr(xi * grid) * density, grid)
    pdf_term = np.trapezoid(xi * _std_normal_pdf(xi * grid) * density, grid)
    return float(cdf_term), float(pdf_term)


def _std_normal_pdf(x):
    return np.exp(-0.5 * np.asarray(x) ** 2) / np.sqrt(2.0 * np.pi)


def mc_expected_gradient(belief, phi, y: int, n_samples: int, seed):
    """Monte-Carlo E[(y - sigmoid(phi' theta)) phi] under the true sigmoid.

    The projection u = phi' theta is itself Gaussian, so u is sampled
    directly; this is exact in distribution and keeps 1e6-sample runs
    cheap. Returns (gradient estimate, standard error per coordinate).
    """
    if n_samples < 10_000:
        raise ValueError("n_samples must be at least 10000")
    phi = np.asarray(phi, dtype=float).reshape(-1)
    m = float(phi @ belief.mean)
    if hasattr(belief, "info_diag"):
        v = float((phi**2 / belief.info_diag).sum())
    else:
        v = float(phi @ belief.covariance @ phi)
    rng = np.random.default_rng(seed)
    u = m + np.sqrt(max(v, 0.0)) * rng.standard_normal(n_samples)
    resid = y - expit(u)
    scale = float(resid.mean())
    se = float(resid.std(ddof=1) / np.sqrt(n_samples))
    return scale * phi, se * np.abs(phi)
