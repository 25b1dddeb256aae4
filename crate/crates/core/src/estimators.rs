//! Pseudo-weights and Hájek means for the seven estimators.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{
    build_pooled_matrix, default_lambda, validate_paired_samples, CohortSample, SurveySample, SurveyWeightRule,
};
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::propensity::{fit_clw_score, fit_pooled_logistic, PropensityFit, SolverConfig};
use crate::scalar::Scalar;
use crate::variance::{alps_variance, clw_variance, tl_variance, tw_variance, VarianceBreakdown};

/// Normal quantile used for the reported 95% intervals.
pub const Z_95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    Naive,
    TW,
    RDW,
    FDW,
    ALP,
    CLW,
    #[serde(rename = "ALP.S", alias = "ALPS")]
    ALPS,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Naive,
        Method::TW,
        Method::RDW,
        Method::FDW,
        Method::ALP,
        Method::CLW,
        Method::ALPS,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Naive => "Naive",
            Method::TW => "TW",
            Method::RDW => "RDW",
            Method::FDW => "FDW",
            Method::ALP => "ALP",
            Method::CLW => "CLW",
            Method::ALPS => "ALP.S",
        }
    }

    /// Methods that need the true participation rates.
    pub fn needs_true_rates(self) -> bool {
        self == Method::TW
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .trim()
            .chars()
            .filter(|c| !matches!(c, '.' | '_' | '-'))
            .collect::<String>()
            .to_ascii_uppercase();
        Ok(match key.as_str() {
            "NAIVE" => Method::Naive,
            "TW" => Method::TW,
            "RDW" => Method::RDW,
            "FDW" => Method::FDW,
            "ALP" => Method::ALP,
            "CLW" => Method::CLW,
            "ALPS" => Method::ALPS,
            _ => return Err(Error::Config(format!("unknown method '{s}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodSpec<T> {
    pub method: Method,
    /// Clamp ALP participation estimates above one to one.
    pub truncate_pi_at_one: bool,
    /// ALP.S scaling constant; `n_c / sum d` when `None`.
    pub lambda: Option<T>,
}

impl<T: Scalar> MethodSpec<T> {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            truncate_pi_at_one: false,
            lambda: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.lambda {
            Some(l) if !(l > T::zero() && l.is_finite()) => {
                Err(Error::Config(format!("lambda must be positive, got {l}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum EstimateWarning {
    /// Cohort units whose estimated participation rate exceeds one.
    PiAboveOne { count: usize },
    /// Participation rates clamped to one.
    PiTruncated { count: usize },
    /// The cohort variance component summed to a negative value.
    NegativeComponent,
    /// Variance taken from the ALP formula with this method's own fit and weights.
    ApproximateVariance,
}

impl fmt::Display for EstimateWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimateWarning::PiAboveOne { count } => write!(f, "pi_above_one={count}"),
            EstimateWarning::PiTruncated { count } => write!(f, "pi_truncated={count}"),
            EstimateWarning::NegativeComponent => f.write_str("negative_variance_component"),
            EstimateWarning::ApproximateVariance => f.write_str("approximate_variance"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedEstimate<T> {
    pub method: Method,
    pub mu_hat: T,
    pub weights: Vec<T>,
    pub variance: Option<VarianceBreakdown<T>>,
    pub fit: Option<PropensityFit<T>>,
    pub warnings: Vec<EstimateWarning>,
}

impl<T: Scalar> WeightedEstimate<T> {
    pub fn var_hat(&self) -> Option<T> {
        self.variance.as_ref().map(|v| v.v_total)
    }

    /// `mu +- 1.96 sqrt(v)`, with negative variance estimates floored at zero.
    pub fn ci(&self) -> Option<(T, T)> {
        self.var_hat().map(|v| {
            let h = T::lit(Z_95) * v.max(T::zero()).sqrt();
            (self.mu_hat - h, self.mu_hat + h)
        })
    }
}

fn check_probabilities<T: Scalar>(p: &[T]) -> Result<()> {
    match p.iter().position(|&v| !(v > T::zero() && v < T::one())) {
        Some(row) => Err(Error::Domain {
            row,
            value: p[row].to_f64_lossy(),
        }),
        None => Ok(()),
    }
}

/// `(1 - p)/p`, the inverse of the participation odds `p/(1 - p)`.
///
/// Returns the weights and the number of units with `p > 1/2`; with `truncate` those
/// weights are set to 1.
pub fn alp_weights<T: Scalar>(p_hat_cohort: &[T], truncate: bool) -> Result<(Vec<T>, usize)> {
    check_probabilities(p_hat_cohort)?;
    let half = T::lit(0.5);
    let mut above = 0;
    let w = p_hat_cohort
        .iter()
        .map(|&p| {
            if p > half {
                above += 1;
                if truncate {
                    return T::one();
                }
            }
            (T::one() - p) / p
        })
        .collect();
    Ok((w, above))
}

pub fn fdw_weights<T: Scalar>(p_hat_cohort: &[T]) -> Result<Vec<T>> {
    check_probabilities(p_hat_cohort)?;
    Ok(p_hat_cohort.iter().map(|&p| T::one() / p).collect())
}

/// Inverse fitted membership probability from the rescaled pooled fit.
pub fn rdw_weights<T: Scalar>(p_hat_cohort: &[T]) -> Result<Vec<T>> {
    fdw_weights(p_hat_cohort)
}

/// `1 / expit(gamma'x) = 1 + exp(-gamma'x)`.
pub fn clw_weights<T: Scalar>(gamma_hat: &[T], x: &Matrix<T>) -> Vec<T> {
    x.row_iter().map(|r| T::one() + (-dot(r, gamma_hat)).exp()).collect()
}

/// `exp(-beta_1'x)`, the linear predictor without the intercept (column 0).
pub fn alps_weights<T: Scalar>(beta_lambda_hat: &[T], x: &Matrix<T>) -> Vec<T> {
    x.row_iter()
        .map(|r| (-dot(&r[1..], &beta_lambda_hat[1..])).exp())
        .collect()
}

pub fn hajek_mean<T: Scalar>(y: &[T], weights: &[T]) -> Result<T> {
    if y.is_empty() {
        return Err(Error::EmptyInput("weighted mean of an empty sample"));
    }
    if y.len() != weights.len() {
        return Err(Error::Shape(format!(
            "{} outcomes but {} weights",
            y.len(),
            weights.len()
        )));
    }
    let total: T = weights.iter().copied().sum();
    if !(total > T::zero()) {
        return Err(Error::Domain {
            row: 0,
            value: total.to_f64_lossy(),
        });
    }
    Ok(dot(y, weights) / total)
}

fn mean<T: Scalar>(y: &[T]) -> Result<T> {
    if y.is_empty() {
        return Err(Error::EmptyInput("cohort has no rows"));
    }
    Ok(y.iter().copied().sum::<T>() / T::count(y.len()))
}

fn variance_warnings<T: Scalar>(v: &VarianceBreakdown<T>, warnings: &mut Vec<EstimateWarning>) {
    if v.negative_component {
        warnings.push(EstimateWarning::NegativeComponent);
    }
}

fn estimate_with_fit<T: Scalar>(
    spec: &MethodSpec<T>,
    cohort: &CohortSample<T>,
    survey: &SurveySample<T>,
    fit: PropensityFit<T>,
) -> Result<WeightedEstimate<T>> {
    let mut warnings = Vec::new();
    let y = cohort.y();
    let (weights, variance) = match spec.method {
        Method::ALP => {
            let (w, above) = alp_weights(&fit.p_hat_cohort, spec.truncate_pi_at_one)?;
            if above > 0 {
                warnings.push(if spec.truncate_pi_at_one {
                    EstimateWarning::PiTruncated { count: above }
                } else {
                    EstimateWarning::PiAboveOne { count: above }
                });
            }
            let mu = hajek_mean(y, &w)?;
            let v = tl_variance(cohort, survey, &fit, &w, mu)?;
            (w, v)
        }
        Method::FDW | Method::RDW => {
            let w = fdw_weights(&fit.p_hat_cohort)?;
            let mu = hajek_mean(y, &w)?;
            let v = tl_variance(cohort, survey, &fit, &w, mu)?;
            warnings.push(EstimateWarning::ApproximateVariance);
            (w, v)
        }
        Method::CLW => {
            let w = clw_weights(&fit.beta, cohort.x());
            let mu = hajek_mean(y, &w)?;
            let v = clw_variance(cohort, survey, &fit, &w, mu)?;
            (w, v)
        }
        Method::ALPS => {
            let w = alps_weights(&fit.beta, cohort.x());
            let mu = hajek_mean(y, &w)?;
            let v = alps_variance(cohort, survey, &fit, &w, mu)?;
            (w, v)
        }
        Method::Naive | Method::TW => unreachable!("no propensity fit for {}", spec.method),
    };
    variance_warnings(&variance, &mut warnings);
    Ok(WeightedEstimate {
        method: spec.method,
        mu_hat: hajek_mean(y, &weights)?,
        weights,
        variance: Some(variance),
        fit: Some(fit),
        warnings,
    })
}

fn fit_for<T: Scalar>(
    spec: &MethodSpec<T>,
    cohort: &CohortSample<T>,
    survey: &SurveySample<T>,
    config: &SolverConfig<T>,
) -> Result<PropensityFit<T>> {
    let rule = match spec.method {
        Method::ALP | Method::FDW => SurveyWeightRule::Identity,
        Method::RDW => SurveyWeightRule::RdwRescale,
        Method::ALPS => SurveyWeightRule::Scaled(spec.lambda.unwrap_or_else(|| default_lambda(cohort, survey))),
        Method::CLW => return fit_clw_score(cohort, survey, config),
        Method::Naive | Method::TW => unreachable!("no propensity fit for {}", spec.method),
    };
    fit_pooled_logistic(&build_pooled_matrix(cohort, survey, rule)?, config)
}

fn estimate_unchecked<T: Scalar>(
    spec: &MethodSpec<T>,
    cohort: &CohortSample<T>,
    survey: &SurveySample<T>,
    config: &SolverConfig<T>,
    true_pi: Option<&[T]>,
    shared: Option<&PropensityFit<T>>,
) -> Result<WeightedEstimate<T>> {
    spec.validate()?;
    match spec.method {
        Method::Naive => Ok(WeightedEstimate {
            method: Method::Naive,
            mu_hat: mean(cohort.y())?,
            weights: vec![T::one(); cohort.len()],
            variance: None,
            fit: None,
            warnings: Vec::new(),
        }),
        Method::TW => {
            let pi = true_pi.ok_or(Error::MissingTrueRates)?;
            if pi.len() != cohort.len() {
                return Err(Error::Shape(format!(
                    "{} true participation rates for {} cohort rows",
                    pi.len(),
                    cohort.len()
                )));
            }
            if let Some(row) = pi.iter().position(|&p| !(p > T::zero() && p <= T::one())) {
                return Err(Error::Domain {
                    row,
                    value: pi[row].to_f64_lossy(),
                });
            }
            let w: Vec<T> = pi.iter().map(|&p| T::one() / p).collect();
            let mu = hajek_mean(cohort.y(), &w)?;
            Ok(WeightedEstimate {
                method: Method::TW,
                mu_hat: mu,
                weights: w,
                variance: Some(tw_variance(cohort, pi, mu)),
                fit: None,
                warnings: Vec::new(),
            })
        }
        _ => {
            let fit = match shared {
                Some(f) => f.clone(),
                None => fit_for(spec, cohort, survey, config)?,
            };
            estimate_with_fit(spec, cohort, survey, fit)
        }
    }
}

/// Validates the samples, fits the method's propensity model and returns its estimate.
///
/// `true_pi` holds the true participation rates of the cohort units and is required by TW
/// only.
pub fn estimate<T: Scalar>(
    spec: &MethodSpec<T>,
    cohort: &CohortSample<T>,
    survey: &SurveySample<T>,
    config: &SolverConfig<T>,
    true_pi: Option<&[T]>,
) -> Result<WeightedEstimate<T>> {
    validate_paired_samples(cohort, survey).into_result()?;
    estimate_unchecked(spec, cohort, survey, config, true_pi, None)
}

/// Runs several methods on one pair of samples; ALP and FDW share a single pooled fit.
///
/// Validation failures are returned as the outer error; per-method failures are reported
/// in place.
pub fn estimate_methods<T: Scalar>(
    specs: &[MethodSpec<T>],
    cohort: &CohortSample<T>,
    survey: &SurveySample<T>,
    config: &SolverConfig<T>,
    true_pi: Option<&[T]>,
) -> Result<Vec<Result<WeightedEstimate<T>>>> {
    validate_paired_samples(cohort, survey).into_result()?;
    let mut identity: Option<PropensityFit<T>> = None;
    let mut out = Vec::with_capacity(specs.len());
    for spec in specs {
        let shares = matches!(spec.method, Method::ALP | Method::FDW);
        if shares && identity.is_none() {
            match fit_for(spec, cohort, survey, config) {
                Ok(f) => identity = Some(f),
                Err(e) => {
                    out.push(Err(e));
                    continue;
                }
            }
        }
        let shared = if shares { identity.as_ref() } else { None };
        out.push(estimate_unchecked(spec, cohort, survey, config, true_pi, shared));
    }
    Ok(out)
}
