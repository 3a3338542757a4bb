import numpy as np
import pytest

from dgvi.belief import GaussianBelief


def make_spd(rng: np.random.Generator, dim: int, conditioning: float = 1.0) -> np.ndarray:
    """Well-conditioned random symmetric positive definite matrix."""
    a = rng.standard_normal((dim, dim))
    m = a @ a.T / dim + conditioning * np.eye(dim)
    return 0.5 * (m + m.T)


def random_belief(rng: np.random.Generator, dim: int) -> GaussianBelief:
    return GaussianBelief(rng.standard_normal(dim), make_spd(rng, dim))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
