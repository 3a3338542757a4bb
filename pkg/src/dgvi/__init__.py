"""Distributed Gaussian variational inference toolkit.

Information-form Gaussian belief algebra, doubly stochastic communication
networks, RBF kernel observation models, streaming variational updates for
classification and regression (full and diagonal covariance), independent
verification oracles, LiDAR data ingestion, a synchronous multi-agent
simulator, and scikit-learn estimator wrappers.
"""

from dgvi.belief import (
    DiagGaussianBelief,
    GaussianBelief,
    geometric_fuse,
    geometric_fuse_diag,
    kl_gaussian,
    rank1_inverse_update,
    sample_gaussian,
)
from dgvi.estimators import GVIKernelClassifier, GVIKernelRegressor
from dgvi.features import KernelModel, featurize, featurize_batch, select_centers
from dgvi.network import (
    WeightMatrix,
    consensus_error,
    is_strongly_connected,
    metropolis_weights,
    sinkhorn_normalize,
)
from dgvi.sim import ExperimentConfig, evaluate, export_feature_stats, export_grid, run_experiment
from dgvi.vi import (
    ClassificationObservation,
    RegressionObservation,
    UpdateOptions,
    dgvi_classify_step,
    dgvi_regression_step,
    diag_dgvi_classify_step,
    expected_loglik_gradient,
    expected_sigmoid,
    gvi_classify_step,
    hessian_scale,
    predict_batch,
)

__version__ = "0.1.0"

__all__ = [
    "GaussianBelief",
    "DiagGaussianBelief",
    "geometric_fuse",
    "geometric_fuse_diag",
    "rank1_inverse_update",
    "kl_gaussian",
    "sample_gaussian",
    "WeightMatrix",
    "sinkhorn_normalize",
    "metropolis_weights",
    "is_strongly_connected",
    "consensus_error",
    "KernelModel",
    "featurize",
    "featurize_batch",
    "select_centers",
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
    "ExperimentConfig",
    "run_experiment",
    "evaluate",
    "export_grid",
    "export_feature_stats",
    "GVIKernelClassifier",
    "GVIKernelRegressor",
    "__version__",
]
