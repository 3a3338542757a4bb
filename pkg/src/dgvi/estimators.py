"""Scikit-learn estimator wrappers around the streaming variational updates.

These cover the single-agent (centralized) case so the models compose
with pipelines, grid search and metrics from the wider ecosystem. The
distributed machinery lives in `dgvi.sim`.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_random_state, check_X_y

from .belief import DiagGaussianBelief, GaussianBelief
from .features import featurize_batch, select_centers
from .vi import (
    ClassificationObservation,
    RegressionObservation,
    UpdateOptions,
    dgvi_classify_step,
    dgvi_regression_step,
    diag_dgvi_classify_step,
    predict_batch,
)

__all__ = ["GVIKernelClassifier", "GVIKernelRegressor"]


class GVIKernelClassifier(BaseEstimator, ClassifierMixin):
    """Binary kernel classifier trained by streaming Gaussian VI updates.

    RBF features around `n_centers` training points feed a logistic
    observation model; the posterior over feature weights is updated one
    observation at a time with closed-form probit approximations, in
    either full-covariance or diagonal form.

    Parameters
    ----------
    n_centers : number of RBF centers, drawn from the training inputs.
    scale : peak kernel value.
    lengthscale : squared-exponential decay rate.
    n_steps : number of streaming updates; observations are drawn
        uniformly with replacement from the training set.
    xi : probit surrogate constant.
    representation : "full" or "diagonal".
    prior_precision : prior information is prior_precision * I.
    random_state : controls center selection and the update stream.
    """

    def __init__(
        self,
        n_centers: int = 50,
        scale: float = 1.0,
        lengthscale: float = 0.3,
        n_steps: int = 20_000,
        xi: float = 0.61,
        representation: str = "full",
        prior_precision: float = 1.0,
        random_state=None,
    ):
        self.n_centers = n_centers
        self.scale = scale
        self.lengthscale = lengthscale
        self.n_steps = n_steps
        self.xi = xi
        self.representation = representation
        self.prior_precision = prior_precision
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.classes_ = np.unique(y)
        if self.classes_.shape[0] != 2:
            raise ValueError(f"exactly two classes are required, got {self.classes_.shape[0]}")
        if self.representation not in ("full", "diagonal"):
            raise ValueError("representation must be 'full' or 'diagonal'")
        labels = (y == self.classes_[1]).astype(int)
        rng = check_random_state(self.random_state)
        seed = rng.randint(np.iinfo(np.int32).max)
        gen = np.random.default_rng(seed)

        self.kernel_model_ = select_centers(
            X,
            labels,
            n_occupied=0,
            n_random=min(self.n_centers, X.shape[0]),
            lengthscale_occupied=self.lengthscale,
            lengthscale_free=self.lengthscale,
            seed=gen,
            scale=self.scale,
        )
        dim = self.kernel_model_.feature_dim
        opts = UpdateOptions(xi=self.xi)
        if self.representation == "diagonal":
            belief = DiagGaussianBelief(np.zeros(dim), np.full(dim, self.prior_precision))
            step = diag_dgvi_classify_step
        else:
            belief = GaussianBelief(
                np.zeros(dim),
                self.prior_precision * np.eye(dim),
                covariance=np.eye(dim) / self.prior_precision,
            )
            step = dgvi_classify_step
        draws = gen.integers(0, X.shape[0], size=self.n_steps)
        for idx in draws:
            obs = ClassificationObservation(x=X[idx], y=int(labels[idx]))
            belief = step([belief], [1.0], obs, self.kernel_model_, opts)
        self.belief_ = belief
        self.n_features_in_ = X.shape[1]
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "belief_")
        X = check_array(X)
        p1 = predict_batch(self.belief_, self.kernel_model_, X, xi=self.xi)
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X):
        proba = self.predict_proba(X)
        return self.classes_[(proba[:, 1] >= 0.5).astype(int)]


class GVIKernelRegressor(BaseEstimator, RegressorMixin):
    """Kernel ridge-style regressor with an exact conjugate posterior.

    The linear-Gaussian likelihood makes the streaming update exact, so a
    single pass over the data yields the full Bayesian posterior over
    feature weights.

    Parameters
    ----------
    obs_precision : scalar precision of the target noise.
    (remaining parameters as in GVIKernelClassifier)
    """

    def __init__(
        self,
        n_centers: int = 50,
        scale: float = 1.0,
        lengthscale: float = 0.3,
        prior_precision: float = 1.0,
        obs_precision: float = 1.0,
        random_state=None,
    ):
        self.n_centers = n_centers
        self.scale = scale
        self.lengthscale = lengthscale
        self.prior_precision = prior_precision
        self.obs_precision = obs_precision
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        rng = check_random_state(self.random_state)
        seed = rng.randint(np.iinfo(np.int32).max)
        self.kernel_model_ = select_centers(
            X,
            np.zeros(X.shape[0], dtype=int),
            n_occupied=0,
            n_random=min(self.n_centers, X.shape[0]),
            lengthscale_occupied=self.lengthscale,
            lengthscale_free=self.lengthscale,
            seed=np.random.default_rng(seed),
            scale=self.scale,
        )
        dim = self.kernel_model_.feature_dim
        belief = GaussianBelief(
            np.zeros(dim),
            self.prior_precision * np.eye(dim),
            covariance=np.eye(dim) / self.prior_precision,
        )
        prec = [[float(self.obs_precision)]]
        for xi_row, target in zip(X, y):
            obs = RegressionObservation(x=xi_row, y=[float(target)], precision=prec)
            belief = dgvi_regression_step([belief], [1.0], obs, self.kernel_model_)
        self.belief_ = belief
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X, return_std: bool = False):
        check_is_fitted(self, "belief_")
        X = check_array(X)
        phi = featurize_batch(self.kernel_model_, X)
        mean = phi @ self.belief_.mean
        if not return_std:
            return mean
        var = np.einsum("ij,ij->i", phi @ self.belief_.covariance, phi)
        return mean, np.sqrt(np.maximum(var, 0.0))
