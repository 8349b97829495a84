"""Scalar-on-function quantile regression with measurement-error correction.

Fits the linear quantile model with a functional covariate, an error-prone
scalar covariate, and error-free covariates, where the functional and
scalar exposures are observed only through replicated noisy measurements.
Six estimators are provided: the oracle (true covariates), the naive
single-replicate fit, the replicate average, and three corrections (SIMEX,
a per-point random-intercept calibration, and its moving-window variant).
A simulation harness, a CSV data pipeline, and a batch command line wrap
the estimation core.
"""

from .basis import basis_for_dimension, bic_score, make_basis, project, reconstruct_beta, select_K_bic
from .calibrate import (
    CalibratedCovariates,
    InsufficientReplicates,
    RandomInterceptFit,
    fit_scalar_random_intercept,
    fsmi_calibrate,
    fui_calibrate,
)
from .covkern import CovarianceSpec, ErrorLaw, build_covariance, sample_correlated
from .dataio import (
    DuplicateKeyError,
    FunctionalDataset,
    ParseError,
    RowIntegrityError,
    aggregate_functional,
    load_csv,
    load_from_config,
    outlier_filter,
    save_csv,
)
from .estimators import MissingTruth, bootstrap_ci, fit, fit_simex_with_trajectory, percent_difference
from .quantreg import QuantileFit, SingularDesign, check_loss, fit_quantile
from .results import METHODS, BootstrapResult, EstimateSet, estimates_to_frame
from .simex import (
    SimexConfig,
    SimexTrajectory,
    estimate_error_covariance,
    estimate_scalar_error_variance,
    quadratic_extrapolate,
    simex_fit,
    trajectory_to_frame,
)
from .simstudy import (
    MetricsTable,
    SimConfig,
    SimDataset,
    generate_dataset,
    run_study,
    study_frame,
    study_presets,
    true_beta1,
)

__all__ = [
    "METHODS",
    "BootstrapResult",
    "CalibratedCovariates",
    "CovarianceSpec",
    "DuplicateKeyError",
    "ErrorLaw",
    "EstimateSet",
    "FunctionalDataset",
    "InsufficientReplicates",
    "MetricsTable",
    "MissingTruth",
    "ParseError",
    "QuantileFit",
    "RandomInterceptFit",
    "RowIntegrityError",
    "SimConfig",
    "SimDataset",
    "SimexConfig",
    "SimexTrajectory",
    "SingularDesign",
    "aggregate_functional",
    "basis_for_dimension",
    "bic_score",
    "bootstrap_ci",
    "build_covariance",
    "check_loss",
    "estimate_error_covariance",
    "estimate_scalar_error_variance",
    "estimates_to_frame",
    "fit",
    "fit_quantile",
    "fit_scalar_random_intercept",
    "fit_simex_with_trajectory",
    "fsmi_calibrate",
    "fui_calibrate",
    "generate_dataset",
    "load_csv",
    "load_from_config",
    "make_basis",
    "outlier_filter",
    "percent_difference",
    "project",
    "quadratic_extrapolate",
    "reconstruct_beta",
    "run_study",
    "sample_correlated",
    "save_csv",
    "select_K_bic",
    "simex_fit",
    "study_frame",
    "study_presets",
    "trajectory_to_frame",
    "true_beta1",
]
