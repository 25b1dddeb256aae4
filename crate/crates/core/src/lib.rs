//! Propensity-score pseudo-weights for a nonprobability cohort combined with a reference
//! probability survey.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the `*64` aliases below
//! fix the usual double-precision instantiation.

// `!(x > 0)` is used on purpose so NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli_io;
pub mod data;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod propensity;
pub mod scalar;
pub mod simulation;
pub mod variance;

pub use data::{
    build_pooled_matrix, default_lambda, validate_paired_samples, CohortSample, DesignInfo, DesignKind, PooledRows,
    SurveySample, SurveyWeightRule, ValidationReport, Violation,
};
pub use error::{Error, Result};
pub use estimators::{
    alp_weights, alps_weights, clw_weights, estimate, estimate_methods, fdw_weights, hajek_mean, rdw_weights,
    EstimateWarning, Method, MethodSpec, WeightedEstimate,
};
pub use linalg::Matrix;
pub use propensity::{fit_clw_score, fit_pooled_logistic, score_at, FitFlavor, PropensityFit, SolverConfig};
pub use scalar::{expit, logit, Scalar};
pub use variance::{
    compute_b_hat, design_variance_iid, design_variance_poisson, design_variance_stratified, tl_variance,
    variance_cohort_component, VarianceBreakdown,
};

pub type Matrix64 = Matrix<f64>;
pub type CohortSample64 = CohortSample<f64>;
pub type SurveySample64 = SurveySample<f64>;
pub type PooledRows64 = PooledRows<f64>;
pub type SolverConfig64 = SolverConfig<f64>;
pub type PropensityFit64 = PropensityFit<f64>;
pub type MethodSpec64 = MethodSpec<f64>;
pub type WeightedEstimate64 = WeightedEstimate<f64>;
pub type VarianceBreakdown64 = VarianceBreakdown<f64>;

pub type Matrix32 = Matrix<f32>;
pub type CohortSample32 = CohortSample<f32>;
pub type SurveySample32 = SurveySample<f32>;
pub type PropensityFit32 = PropensityFit<f32>;
pub type WeightedEstimate32 = WeightedEstimate<f32>;
