"""Self-contained verification suites comparing fast paths to references.

Each check pits an analytic code path against an independent oracle
(dense inversion, brute-force quadrature, Monte Carlo, particle filtering,
or a textbook recursion) and reports the worst observed deviation against
its threshold. The CLI `verify` subcommand and the acceptance tests both
run these.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .belief import GaussianBelief, rank1_inverse_update
from .network import metropolis_weights, sinkhorn_normalize
from .oracle import (
    LinearGaussianModel,
    conjugate_fusion_posterior,
    mc_expected_gradient,
    particle_fusion_posterior,
    quadrature_probit_moments,
)
from .vi import RegressionObservation, dgvi_regression_step, expected_loglik_gradient, expected_sigmoid, hessian_scale

__all__ = [
    "CheckResult",
    "check_example1",
    "check_quadrature",
    "check_probit_mc",
    "check_woodbury",
    "check_conjugate_regression",
    "check_sinkhorn",
    "ALL_CHECKS",
    "run_checks",
]


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    threshold: float
    passed: bool
    detail: str = ""


def _random_spd(rng: np.random.Generator, dim: int, conditioning: float = 1.0) -> np.ndarray:
    a = rng.standard_normal((dim, dim))
    m = a @ a.T / dim + conditioning * np.eye(dim)
    return 0.5 * (m + m.T)


def _random_belief(rng: np.random.Generator, dim: int) -> GaussianBelief:
    omega = _random_spd(rng, dim)
    mean = rng.standard_normal(dim)
    return GaussianBelief(mean, omega)


def check_example1(seed: int = 7, n_particles: int = 100_000) -> CheckResult:
    """Particle fusion vs conjugate closed form on the four-prior setup.

    Four unit-covariance Gaussian priors centered on the unit circle,
    equal weights, identity observation model, measurement [1, 1].
    """
    angles = np.array([0.0, 0.5, 1.0, 1.5]) * np.pi
    priors = [GaussianBelief([np.cos(a), np.sin(a)], np.eye(2)) for a in angles]
    weights = np.full(4, 0.25)
    model = LinearGaussianModel(H=np.eye(2), obs_precision=np.eye(2))
    z = np.array([1.0, 1.0])
    exact = conjugate_fusion_posterior(priors, weights, model, z)
    _, fitted = particle_fusion_posterior(priors, weights, model, z, n_particles, seed)
    gap = float(np.linalg.norm(fitted.mean - exact.mean))
    return CheckResult(
        name="example1_particle_vs_conjugate_mean",
        value=gap,
        threshold=0.1,
        passed=gap <= 0.1,
        detail=f"particle mean {fitted.mean.round(4).tolist()} vs exact {exact.mean.round(4).tolist()}",
    )


def check_quadrature(seed: int = 7, n_cases: int = 100, xi: float = 0.61) -> CheckResult:
    """Closed-form probit moments vs brute-force quadrature."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_cases):
        dim = int(rng.integers(2, 16))
        belief = _random_belief(rng, dim)
        phi = rng.standard_normal(dim)
        m = float(phi @ belief.mean)
        v = float(phi @ belief.covariance @ phi)
        ref_cdf, ref_pdf = quadrature_probit_moments(m, v, xi)
        worst = max(worst, abs(expected_sigmoid(belief, phi, xi) - ref_cdf))
        worst = max(worst, abs(hessian_scale(belief, phi, xi) - ref_pdf))
    return CheckResult(
        name="probit_closed_form_vs_quadrature",
        value=worst,
        threshold=1e-6,
        passed=worst <= 1e-6,
        detail=f"{n_cases} random (belief, phi) cases",
    )


def check_probit_mc(seed: int = 7, n_cases: int = 100, n_samples: int = 1_000_000) -> CheckResult:
    """Probit-approximate gradient vs true-sigmoid Monte Carlo."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_cases):
        dim = int(rng.integers(2, 12))
        belief = _random_belief(rng, dim)
        phi = rng.standard_normal(dim)
        y = int(rng.integers(0, 2))
        approx = expected_loglik_gradient(belief, phi, y)
        mc, _ = mc_expected_gradient(belief, phi, y, n_samples, seed=rng.integers(2**63))
        worst = max(worst, float(np.abs(approx - mc).max() / np.linalg.norm(phi)))
    return CheckResult(
        name="probit_gradient_vs_sigmoid_mc",
        value=worst,
        threshold=0.02,
        passed=worst <= 0.02,
        detail=f"{n_cases} cases, {n_samples} samples each, per-coordinate scaled by |phi|",
    )


def check_woodbury(seed: int = 7, n_cases: int = 100, max_dim: int = 200) -> CheckResult:
    """Rank-1 inverse update vs direct dense inversion."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for case in range(n_cases):
        dim = int(rng.integers(2, max_dim + 1)) if case else max_dim
        sigma = _random_spd(rng, dim)
        phi = rng.standard_normal(dim)
        gamma = float(rng.uniform(0.0, 2.0))
        fast = rank1_inverse_update(sigma, phi, gamma)
        direct = np.linalg.inv(np.linalg.inv(sigma) + gamma * np.outer(phi, phi))
        worst = max(worst, float(np.abs(fast - direct).max()))
    return CheckResult(
        name="rank1_update_vs_dense_inverse",
        value=worst,
        threshold=1e-8,
        passed=worst <= 1e-8,
        detail=f"{n_cases} random SPD cases up to {max_dim}x{max_dim}",
    )


def check_conjugate_regression(seed: int = 7, n_cases: int = 100) -> CheckResult:
    """Single-agent regression step vs the information-filter recursion."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_cases):
        dim = int(rng.integers(2, 31))
        m = int(rng.integers(1, 6))
        prior = _random_belief(rng, dim)
        phi = rng.standard_normal((dim, m))
        s = _random_spd(rng, m)
        y = rng.standard_normal(m)
        obs = RegressionObservation(x=np.zeros(2), y=y, precision=s)
        stepped = dgvi_regression_step([prior], [1.0], obs, phi=phi)
        # textbook information filter: add information, solve once
        omega = prior.information + phi @ s @ phi.T
        eta = prior.information_mean() + phi @ s @ y
        mean = np.linalg.solve(omega, eta)
        worst = max(worst, float(np.abs(stepped.mean - mean).max()))
        worst = max(worst, float(np.abs(stepped.information - omega).max()))
    return CheckResult(
        name="regression_step_vs_information_filter",
        value=worst,
        threshold=1e-8,
        passed=worst <= 1e-8,
        detail=f"{n_cases} problems, dims <= 30, targets <= 5",
    )


def check_sinkhorn(seed: int = 7, n_cases: int = 50, max_n: int = 50) -> CheckResult:
    """Row/column sums after normalization, plus exact Metropolis sums."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_cases):
        n = int(rng.integers(2, max_n + 1))
        m = np.eye(n)
        for i in range(n):  # ring keeps the support irreducible
            m[i, (i + 1) % n] = rng.uniform(0.5, 2.0)
        extra = rng.random((n, n)) < 0.2
        m[extra] = rng.uniform(0.5, 2.0, size=int(extra.sum()))
        np.fill_diagonal(m, rng.uniform(0.5, 2.0, size=n))
        result = sinkhorn_normalize(m, tol=1e-10, max_iter=10_000)
        rows = result.matrix.sum(axis=1)
        cols = result.matrix.sum(axis=0)
        worst = max(worst, float(np.abs(rows - 1.0).max()), float(np.abs(cols - 1.0).max()))
    # Metropolis closed form on a few graphs
    metro_worst = 0.0
    for edges, n in [([(0, 1), (1, 2)], 3), ([(i, j) for i in range(4) for j in range(i + 1, 4)], 4)]:
        w = metropolis_weights(edges, n)
        metro_worst = max(
            metro_worst,
            float(np.abs(w.matrix.sum(axis=1) - 1.0).max()),
            float(np.abs(w.matrix.sum(axis=0) - 1.0).max()),
        )
    passed = worst <= 1e-10 and metro_worst <= 1e-12
    return CheckResult(
        name="sinkhorn_and_metropolis_sums",
        value=max(worst, metro_worst),
        threshold=1e-10,
        passed=passed,
        detail=f"{n_cases} random irreducible matrices up to {max_n}x{max_n}; Metropolis deviation {metro_worst:.2e}",
    )


ALL_CHECKS = {
    "example1": check_example1,
    "quadrature": check_quadrature,
    "probit-mc": check_probit_mc,
    "woodbury": check_woodbury,
    "conjugate-regression": check_conjugate_regression,
    "sinkhorn": check_sinkhorn,
}


def run_checks(suite: str = "all", seed: int = 7) -> list[CheckResult]:
    if suite == "all":
        return [fn(seed=seed) for fn in ALL_CHECKS.values()]
    if suite not in ALL_CHECKS:
        raise ValueError(f"unknown suite {suite!r}; choose from {sorted(ALL_CHECKS)} or 'all'")
    return [ALL_CHECKS[suite](seed=seed)]
