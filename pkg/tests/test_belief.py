import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import multivariate_normal

from dgvi.belief import (
    BeliefError,
    DiagGaussianBelief,
    GaussianBelief,
    geometric_fuse,
    geometric_fuse_diag,
    kl_gaussian,
    load_belief_json,
    rank1_inverse_update,
    sample_gaussian,
    save_belief_json,
)

from conftest import make_spd, random_belief


def grid_fuse_1d(precisions, means, weights, lo=-20.0, hi=20.0, n=400_001):
    """Oracle: moment-match the normalized product of powered 1-D Gaussians."""
    u = np.linspace(lo, hi, n)
    log_dens = np.zeros_like(u)
    for prec, mu, w in zip(precisions, means, weights):
        log_dens += w * (-0.5 * prec * (u - mu) ** 2 + 0.5 * np.log(prec / (2 * np.pi)))
    dens = np.exp(log_dens - log_dens.max())
    dens /= np.trapezoid(dens, u)
    mean = np.trapezoid(u * dens, u)
    var = np.trapezoid((u - mean) ** 2 * dens, u)
    return 1.0 / var, mean


class TestGaussianBelief:
    def test_rejects_asymmetric_information(self):
        with pytest.raises(BeliefError):
            GaussianBelief([0.0, 0.0], [[1.0, 0.5], [0.2, 1.0]])

    def test_rejects_dimension_mismatch(self):
        with pytest.raises(BeliefError):
            GaussianBelief([0.0, 0.0, 0.0], np.eye(2))

    def test_rejects_inconsistent_cache(self):
        with pytest.raises(BeliefError):
            GaussianBelief([0.0], [[2.0]], covariance=[[1.0]])

    def test_covariance_is_lazy_inverse(self, rng):
        belief = random_belief(rng, 6)
        np.testing.assert_allclose(belief.covariance @ belief.information, np.eye(6), atol=1e-10)

    def test_diag_rejects_nonpositive_entries(self):
        with pytest.raises(BeliefError):
            DiagGaussianBelief([0.0, 0.0], [1.0, 0.0])

    def test_json_roundtrip_full(self, rng, tmp_path):
        belief = random_belief(rng, 4)
        path = tmp_path / "belief.json"
        save_belief_json(belief, path)
        back = load_belief_json(path)
        np.testing.assert_array_equal(back.mean, belief.mean)
        np.testing.assert_array_equal(back.information, belief.information)

    def test_json_roundtrip_diag(self, tmp_path):
        belief = DiagGaussianBelief([1.0, -2.0], [3.0, 0.5])
        path = tmp_path / "belief.json"
        save_belief_json(belief, path)
        back = load_belief_json(path)
        assert isinstance(back, DiagGaussianBelief)
        np.testing.assert_array_equal(back.info_diag, belief.info_diag)


class TestGeometricFuse:
    def test_single_belief_identity(self, rng):
        belief = random_belief(rng, 3)
        assert geometric_fuse([belief], [1.0]) is belief

    def test_1d_pair_matches_grid_oracle(self):
        # oracle computed first, then the closed form is checked against it
        prec_oracle, mean_oracle = grid_fuse_1d([1.0, 3.0], [0.0, 4.0], [0.5, 0.5])
        np.testing.assert_allclose(prec_oracle, 2.0, atol=1e-6)
        np.testing.assert_allclose(mean_oracle, 3.0, atol=1e-6)
        fused = geometric_fuse(
            [GaussianBelief([0.0], [[1.0]]), GaussianBelief([4.0], [[3.0]])], [0.5, 0.5]
        )
        np.testing.assert_allclose(fused.information[0, 0], prec_oracle, atol=1e-6)
        np.testing.assert_allclose(fused.mean[0], mean_oracle, atol=1e-6)

    def test_identical_beliefs_uniform_weights(self, rng):
        belief = random_belief(rng, 4)
        fused = geometric_fuse([belief] * 5, np.full(5, 0.2))
        np.testing.assert_allclose(fused.mean, belief.mean, atol=1e-12)
        np.testing.assert_allclose(fused.information, belief.information, atol=1e-12)

    def test_information_is_exact_weighted_sum(self, rng):
        beliefs = [random_belief(rng, 3) for _ in range(3)]
        w = np.array([0.2, 0.3, 0.5])
        fused = geometric_fuse(beliefs, w)
        expected = sum(wj * b.information for wj, b in zip(w, beliefs))
        np.testing.assert_array_equal(fused.information, expected)

    def test_permutation_invariance(self, rng):
        beliefs = [random_belief(rng, 3) for _ in range(4)]
        w = np.array([0.1, 0.2, 0.3, 0.4])
        fused = geometric_fuse(beliefs, w)
        perm = [2, 0, 3, 1]
        fused_p = geometric_fuse([beliefs[i] for i in perm], w[perm])
        np.testing.assert_allclose(fused_p.mean, fused.mean, atol=1e-12)
        np.testing.assert_allclose(fused_p.information, fused.information, atol=1e-12)

    def test_weight_sum_violation(self, rng):
        with pytest.raises(ValueError):
            geometric_fuse([random_belief(rng, 2)], [0.9])

    def test_dimension_mismatch(self, rng):
        with pytest.raises(ValueError):
            geometric_fuse([random_belief(rng, 2), random_belief(rng, 3)], [0.5, 0.5])


class TestGeometricFuseDiag:
    def test_single_identity(self):
        belief = DiagGaussianBelief([1.0, 2.0], [1.0, 4.0])
        assert geometric_fuse_diag([belief], [1.0]) is belief

    def test_1d_pair_matches_grid_oracle(self):
        prec_oracle, mean_oracle = grid_fuse_1d([1.0, 3.0], [0.0, 4.0], [0.5, 0.5])
        fused = geometric_fuse_diag(
            [DiagGaussianBelief([0.0], [1.0]), DiagGaussianBelief([4.0], [3.0])], [0.5, 0.5]
        )
        np.testing.assert_allclose(fused.info_diag[0], prec_oracle, atol=1e-6)
        np.testing.assert_allclose(fused.mean[0], mean_oracle, atol=1e-6)

    def test_identical_unchanged(self):
        belief = DiagGaussianBelief([1.0, -1.0], [2.0, 3.0])
        fused = geometric_fuse_diag([belief] * 4, np.full(4, 0.25))
        np.testing.assert_allclose(fused.mean, belief.mean, atol=1e-12)
        np.testing.assert_allclose(fused.info_diag, belief.info_diag, atol=1e-12)


class TestRank1InverseUpdate:
    def test_gamma_zero_is_noop(self, rng):
        sigma = make_spd(rng, 5)
        np.testing.assert_array_equal(rank1_inverse_update(sigma, rng.standard_normal(5), 0.0), sigma)

    def test_scalar_case(self):
        # (1/0.5 + 1)^-1 = 1/3
        out = rank1_inverse_update(np.array([[0.5]]), np.array([1.0]), 1.0)
        np.testing.assert_allclose(out[0, 0], 1.0 / 3.0, rtol=1e-15)

    def test_matches_dense_inverse_50(self, rng):
        sigma = make_spd(rng, 50)
        phi = rng.standard_normal(50)
        fast = rank1_inverse_update(sigma, phi, 0.7)
        direct = np.linalg.inv(np.linalg.inv(sigma) + 0.7 * np.outer(phi, phi))
        assert np.abs(fast - direct).max() <= 1e-8

    def test_result_is_symmetric(self, rng):
        out = rank1_inverse_update(make_spd(rng, 8), rng.standard_normal(8), 1.3)
        np.testing.assert_array_equal(out, out.T)

    @settings(max_examples=25, deadline=None)
    @given(dim=st.integers(2, 30), gamma=st.floats(0.0, 5.0), seed=st.integers(0, 2**31))
    def test_roundtrip_with_direct_inverse(self, dim, gamma, seed):
        rng = np.random.default_rng(seed)
        sigma = make_spd(rng, dim)
        phi = rng.standard_normal(dim)
        fast = rank1_inverse_update(sigma, phi, gamma)
        recovered = np.linalg.inv(np.linalg.inv(sigma) + gamma * np.outer(phi, phi))
        assert np.abs(fast - recovered).max() <= 1e-8


class TestKLGaussian:
    def test_self_divergence_zero(self, rng):
        p = random_belief(rng, 4)
        assert kl_gaussian(p, p) == 0.0

    def test_unit_mean_shift_closed_form(self):
        p = GaussianBelief([0.0], [[1.0]])
        q = GaussianBelief([1.0], [[1.0]])
        np.testing.assert_allclose(kl_gaussian(p, q), 0.5, rtol=1e-12)

    def test_matches_monte_carlo(self, rng):
        p = random_belief(rng, 3)
        q = random_belief(rng, 3)
        kl = kl_gaussian(p, q)
        samples = sample_gaussian(p, 1_000_000, seed=9)
        log_p = multivariate_normal(p.mean, p.covariance).logpdf(samples)
        log_q = multivariate_normal(q.mean, q.covariance).logpdf(samples)
        diffs = log_p - log_q
        se = diffs.std(ddof=1) / np.sqrt(diffs.shape[0])
        assert abs(kl - diffs.mean()) <= 3.0 * se

    def test_nonnegative_on_random_pairs(self, rng):
        for _ in range(1000):
            dim = int(rng.integers(1, 6))
            p = random_belief(rng, dim)
            q = random_belief(rng, dim)
            assert kl_gaussian(p, q) >= 0.0

    def test_dimension_mismatch(self, rng):
        with pytest.raises(ValueError):
            kl_gaussian(random_belief(rng, 2), random_belief(rng, 3))


class TestSampleGaussian:
    def test_deterministic_per_seed(self, rng):
        belief = random_belief(rng, 3)
        a = sample_gaussian(belief, 100, seed=5)
        b = sample_gaussian(belief, 100, seed=5)
        np.testing.assert_array_equal(a, b)

    def test_large_sample_mean(self):
        belief = GaussianBelief(np.zeros(2), np.eye(2))
        samples = sample_gaussian(belief, 1_000_000, seed=3)
        # CLT bound: 3 / sqrt(count)
        assert np.abs(samples.mean(axis=0)).max() <= 0.01

    def test_single_row(self, rng):
        belief = random_belief(rng, 4)
        assert sample_gaussian(belief, 1, seed=0).shape == (1, 4)

    def test_sample_covariance_converges(self, rng):
        belief = random_belief(rng, 3)
        samples = sample_gaussian(belief, 500_000, seed=11)
        np.testing.assert_allclose(np.cov(samples.T), belief.covariance, atol=0.02)

    def test_diag_variant(self):
        belief = DiagGaussianBelief([1.0, -1.0], [4.0, 0.25])
        samples = sample_gaussian(belief, 400_000, seed=2)
        np.testing.assert_allclose(samples.mean(axis=0), belief.mean, atol=0.02)
        np.testing.assert_allclose(samples.var(axis=0), [0.25, 4.0], rtol=0.02)

    def test_count_must_be_positive(self, rng):
        with pytest.raises(ValueError):
            sample_gaussian(random_belief(rng, 2), 0, seed=1)
