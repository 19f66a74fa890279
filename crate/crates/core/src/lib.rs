//! Nonparametric regression of a real response on compositional covariates.
//!
//! Covariates live on the simplex and are handled through the isometric
//! log-ratio (ilr) chart. On top of the Aitchison geometry the crate provides
//! Gaussian-kernel local constant and local linear smoothers, in a least
//! squares and in a robust (M-estimation) flavour, cross-validated bandwidth
//! selection, and a Monte Carlo harness for comparing the four estimators.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bandwidth;
pub mod error;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod mc;
pub mod models;
pub mod robust;
pub mod simplex;
pub mod smoother;

pub use bandwidth::{
    cv_residuals, score_ls, score_robust, select_bandwidth, CvConfig, CvCriterion, CvEntry,
    CvResult, Dispersion, FoldPartition, Folds, Location,
};
pub use error::{Error, Result};
pub use io::{flag_outliers, make_grid, read_dataset, ternary, DataError, GridSpec, OutlierReport};
pub use kernel::{
    conditional_cdf, fit_local_constant_ls, fit_local_linear_ls, kernel_value, kernel_weights,
    kernel_weights_ilr, weighted_quantile, Dataset, KernelProfile, KernelSpec, LocalLinear,
    WeightVector,
};
pub use mc::{
    generate_replication, ise, run_study, squared_bias, true_regression, McReport, McScenario,
};
pub use models::{
    dirichlet_density, dirichlet_sample, error_sample, logistic_normal_density_ilr,
    logistic_normal_sample, logistic_normal_sample_ilr, DirichletParams, ErrorLaw,
    LogisticNormalParams, RngStream,
};
pub use robust::{
    fit_local_linear_m, fit_local_m, fit_surface, local_median, LocalDegree, MFit,
    MSmootherConfig, RhoFamily, RhoSpec, ScaleKind, ScaleMode, ScaleSpec,
};
pub use simplex::{
    aitchison_dist, aitchison_inner, aitchison_norm, alr, closure, clr, ilr, inv_alr, inv_clr,
    inv_ilr, perturb, perturb_diff, pivot_contrast_matrix, power, ContrastMatrix, IlrVector,
    SimplexPoint,
};
pub use smoother::{fit, FitOptions, Method, PointFit, Smoother, SmootherFit};
