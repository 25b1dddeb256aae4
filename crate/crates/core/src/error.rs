use thiserror::Error;

use crate::data::ValidationReport;

/// Errors raised by the fitting, weighting, variance and simulation layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("solver did not converge after {iterations} iterations (scaled score norm {score_norm:e}); check for separation or rank deficiency")]
    NonConvergence { iterations: usize, score_norm: f64 },

    #[error("linear system is singular or not positive definite (pivot {pivot} of {dim})")]
    SingularSystem { pivot: usize, dim: usize },

    #[error("cohort covariate totals cannot be reproduced by any participation rate below one on the weighted survey")]
    InfeasibleTotals,

    #[error("fitted probability outside (0, 1) at cohort row {row}: {value}")]
    Domain { row: usize, value: f64 },

    #[error("rescale factor (N_p - n_c) / N_p is not positive: n_c = {n_cohort}, N_p = {n_hat_p}")]
    Rescale { n_cohort: usize, n_hat_p: f64 },

    #[error("design error: {0}")]
    Design(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("invalid samples: {0}")]
    Validation(ValidationReport),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("true participation rates are required for the TW estimator")]
    MissingTrueRates,

    #[error("target is infeasible: {0}")]
    InfeasibleTarget(String),

    #[error("calibration did not converge: {0}")]
    NoConvergence(String),

    #[error("need at least {needed} replicates, got {got}")]
    InsufficientReplicates { needed: usize, got: usize },

    #[error("cannot parse {value:?} as a number at line {line}, column '{column}'")]
    Parse { line: u64, column: String, value: String },

    #[error("missing value at line {line}, column '{column}'")]
    MissingValue { line: u64, column: String },

    #[error("column '{column}' not found in {path}")]
    MissingColumn { column: String, path: String },

    #[error("{0} has no data rows")]
    EmptyFile(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("calibration failed for cell (scenario {scenario}, f_c = {f_c}): {source}")]
    CellInfeasible {
        scenario: String,
        f_c: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Stable machine-readable name, used in CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonConvergence { .. } => "NonConvergence",
            Error::SingularSystem { .. } => "SingularSystem",
            Error::InfeasibleTotals => "InfeasibleTotals",
            Error::Domain { .. } => "DomainError",
            Error::Rescale { .. } => "RescaleError",
            Error::Design(_) => "DesignError",
            Error::EmptyInput(_) => "EmptyInput",
            Error::Shape(_) => "ShapeError",
            Error::Validation(_) => "ValidationError",
            Error::Config(_) => "ConfigError",
            Error::MissingTrueRates => "MissingTrueRates",
            Error::InfeasibleTarget(_) => "InfeasibleTarget",
            Error::NoConvergence(_) => "NoConvergence",
            Error::InsufficientReplicates { .. } => "InsufficientReplicates",
            Error::CellInfeasible { .. } => "CellInfeasible",
            Error::Parse { .. } => "ParseError",
            Error::MissingValue { .. } => "ParseError",
            Error::MissingColumn { .. } => "MissingColumn",
            Error::EmptyFile(_) => "EmptyFile",
            Error::Io(_) => "IoError",
            Error::Context { source, .. } => source.kind(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
