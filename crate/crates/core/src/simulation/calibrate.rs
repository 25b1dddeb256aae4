use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{expit, logit};

use super::population::FinitePopulation;

/// Slopes on `x1..x4` of both participation models.
pub const PAPER_SLOPES: [f64; 4] = [0.18, 0.18, -0.27, -0.27];

/// Participation link of the cohort self-selection model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    /// `pi = exp(b0 + b'x)`; the ALP model is correctly specified.
    #[serde(rename = "log_link", alias = "scenario1", alias = "1")]
    LogLink,
    /// `pi = expit(b0 + b'x)`; the CLW model is correctly specified.
    #[serde(rename = "logit_link", alias = "scenario2", alias = "2")]
    LogitLink,
}

impl Scenario {
    pub fn number(self) -> u8 {
        match self {
            Scenario::LogLink => 1,
            Scenario::LogitLink => 2,
        }
    }

    pub fn rate(self, eta: f64) -> f64 {
        match self {
            Scenario::LogLink => eta.exp(),
            Scenario::LogitLink => expit(eta),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::LogLink => "log_link",
            Scenario::LogitLink => "logit_link",
        })
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "log_link" | "log" | "scenario1" | "1" => Ok(Scenario::LogLink),
            "logit_link" | "logit" | "scenario2" | "2" => Ok(Scenario::LogitLink),
            _ => Err(Error::Config(format!("unknown scenario '{s}'"))),
        }
    }
}

/// `b'x` without intercept for every population unit.
pub fn linear_predictor(pop: &FinitePopulation, slopes: &[f64; 4]) -> Vec<f64> {
    pop.x
        .row_iter()
        .map(|r| r[1..].iter().zip(slopes).map(|(a, b)| a * b).sum())
        .collect()
}

pub fn participation_rates(eta: &[f64], scenario: Scenario, intercept: f64) -> Vec<f64> {
    eta.iter().map(|&e| scenario.rate(intercept + e)).collect()
}

fn mean_rate(eta: &[f64], scenario: Scenario, intercept: f64) -> f64 {
    eta.iter().map(|&e| scenario.rate(intercept + e)).sum::<f64>() / eta.len() as f64
}

/// Intercept making the mean participation rate equal `f_c`.
///
/// The log link has the closed form `log(N f_c / sum exp(b'x))`; the logit link is solved
/// by bisection on a bracket from the range of `b'x`.
pub fn calibrate_participation_intercept(
    pop: &FinitePopulation,
    scenario: Scenario,
    slopes: &[f64; 4],
    f_c: f64,
) -> Result<f64> {
    if !(f_c > 0.0 && f_c < 1.0) {
        return Err(Error::Config(format!("f_c must lie in (0, 1), got {f_c}")));
    }
    let eta = linear_predictor(pop, slopes);
    let (lo_eta, hi_eta) = eta
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &e| (a.min(e), b.max(e)));
    match scenario {
        Scenario::LogLink => {
            let total: f64 = eta.iter().map(|e| e.exp()).sum();
            let b0 = (f_c * eta.len() as f64 / total).ln();
            if b0 + hi_eta >= 0.0 {
                return Err(Error::InfeasibleTarget(format!(
                    "log-link participation rate reaches {:.4} > 1 at f_c = {f_c}",
                    (b0 + hi_eta).exp()
                )));
            }
            Ok(b0)
        }
        Scenario::LogitLink => {
            let mut lo = logit(f_c) - hi_eta;
            let mut hi = logit(f_c) - lo_eta;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if mean_rate(&eta, scenario, mid) < f_c {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let b0 = 0.5 * (lo + hi);
            let achieved = mean_rate(&eta, scenario, b0);
            if (achieved - f_c).abs() >= 1e-8 {
                return Err(Error::NoConvergence(format!(
                    "intercept bisection reached mean rate {achieved} for target {f_c}"
                )));
            }
            Ok(b0)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurveyCalibration {
    pub constant: f64,
    /// Survey inclusion probabilities, clipped at one.
    pub inclusion: Vec<f64>,
    /// Units whose probability was clipped.
    pub clipped: usize,
}

/// Size measure `q = const + x3 + outcome_in_q * y` with `max q / min q = ratio`, and
/// inclusion probabilities `n_p q / sum q`.
///
/// The ratio is decreasing in `const` above `-min s`, so the unique solution is
/// `(max s - ratio * min s) / (ratio - 1)` with `s = x3 + outcome_in_q * y`.
pub fn calibrate_survey_const(
    pop: &FinitePopulation,
    f_p: f64,
    ratio: f64,
    outcome_in_q: f64,
) -> Result<SurveyCalibration> {
    if !(f_p > 0.0 && f_p <= 1.0) {
        return Err(Error::Config(format!("f_p must lie in (0, 1], got {f_p}")));
    }
    if !(ratio > 1.0 && ratio.is_finite()) {
        return Err(Error::InfeasibleTarget(format!(
            "weight ratio must exceed 1, got {ratio}"
        )));
    }
    let s: Vec<f64> = pop
        .x
        .row_iter()
        .zip(&pop.y)
        .map(|(r, &y)| r[3] + outcome_in_q * y)
        .collect();
    let (min, max) = s
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let spread = max - min;
    if !(spread > f64::EPSILON * max.abs().max(1.0)) {
        return Err(Error::InfeasibleTarget(format!(
            "size measure has no spread; ratio {ratio} is unreachable"
        )));
    }
    let constant = (max - ratio * min) / (ratio - 1.0);
    let q: Vec<f64> = s.iter().map(|v| constant + v).collect();
    let total: f64 = q.iter().sum();
    let n_p = (f_p * pop.len() as f64).round();
    let mut clipped = 0;
    let inclusion = q
        .iter()
        .map(|v| {
            let p = n_p * v / total;
            if p > 1.0 {
                clipped += 1;
                1.0
            } else {
                p
            }
        })
        .collect();
    Ok(SurveyCalibration {
        constant,
        inclusion,
        clipped,
    })
}
