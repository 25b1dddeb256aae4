use std::path::PathBuf;

use serde::Serialize;

use crate::data::DesignKind;
use crate::error::{Error, Result};
use crate::estimators::{estimate_methods, Method, MethodSpec};
use crate::propensity::SolverConfig;

use super::ingest::{ingest_cohort, ingest_survey, SurveyColumns};

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationJob {
    pub cohort_path: PathBuf,
    pub survey_path: PathBuf,
    pub outcome: String,
    pub covariates: Vec<String>,
    pub weight: String,
    pub strata: Option<String>,
    pub psu: Option<String>,
    pub design: DesignKind,
    pub methods: Vec<Method>,
    pub truncate_pi: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightSummary {
    pub min: f64,
    pub max: f64,
    /// Standard deviation over mean, in percent.
    pub cv_pct: f64,
}

impl WeightSummary {
    pub fn of(w: &[f64]) -> Self {
        let n = w.len() as f64;
        let mean = w.iter().sum::<f64>() / n;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self {
            min: w.iter().cloned().fold(f64::INFINITY, f64::min),
            max: w.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            cv_pct: 100.0 * var.sqrt() / mean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodRow {
    pub method: Method,
    pub estimate: f64,
    pub variance: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    /// `100 (mu - mu_ref) / mu_ref`.
    pub pct_rd: Option<f64>,
    /// `(mu - mu_ref)^2 + v`.
    pub mse: Option<f64>,
    pub warnings: Vec<String>,
    pub weights: WeightSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationReport {
    /// Design-weighted survey mean of the outcome, when the survey carries it.
    pub reference: Option<f64>,
    pub n_cohort: usize,
    pub n_survey: usize,
    pub rows: Vec<MethodRow>,
    /// Pseudo-weights per method, cohort order.
    #[serde(skip)]
    pub weights: Vec<(Method, Vec<f64>)>,
}

pub fn run_estimation_job(job: &EstimationJob) -> Result<EstimationReport> {
    if job.methods.is_empty() {
        return Err(Error::Config("no methods requested".into()));
    }
    let covs: Vec<&str> = job.covariates.iter().map(String::as_str).collect();
    let cohort = ingest_cohort(&job.cohort_path, &job.outcome, &covs)
        .map_err(|e| e.context(format!("reading cohort {}", job.cohort_path.display())))?;
    let survey = ingest_survey(
        &job.survey_path,
        &SurveyColumns {
            covariates: &covs,
            weight: &job.weight,
            design: job.design,
            strata: job.strata.as_deref(),
            psu: job.psu.as_deref(),
            outcome: Some(&job.outcome),
        },
    )
    .map_err(|e| e.context(format!("reading survey {}", job.survey_path.display())))?;

    let specs: Vec<MethodSpec<f64>> = job
        .methods
        .iter()
        .map(|&m| MethodSpec {
            truncate_pi_at_one: job.truncate_pi,
            ..MethodSpec::new(m)
        })
        .collect();
    let results = estimate_methods(&specs, &cohort, &survey, &SolverConfig::default(), None)?;
    let reference = survey.reference_mean();

    let mut rows = Vec::with_capacity(results.len());
    let mut weights = Vec::with_capacity(results.len());
    for (spec, r) in specs.iter().zip(results) {
        let e = r.map_err(|e| e.context(format!("method {}", spec.method)))?;
        let ci = e.ci();
        let variance = e.var_hat();
        rows.push(MethodRow {
            method: e.method,
            estimate: e.mu_hat,
            variance,
            ci_low: ci.map(|c| c.0),
            ci_high: ci.map(|c| c.1),
            pct_rd: reference.map(|r| 100.0 * (e.mu_hat - r) / r),
            mse: reference.map(|r| (e.mu_hat - r).powi(2) + variance.unwrap_or(0.0)),
            warnings: e.warnings.iter().map(ToString::to_string).collect(),
            weights: WeightSummary::of(&e.weights),
        });
        weights.push((e.method, e.weights));
    }
    Ok(EstimationReport {
        reference,
        n_cohort: cohort.len(),
        n_survey: survey.len(),
        rows,
        weights,
    })
}
