use serde::Serialize;

use crate::error::{Error, Result};

/// Monte Carlo summary of one estimator in one cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    /// `100 * mean(mu_hat - mu) / mu`.
    pub pct_rb: f64,
    /// Empirical variance with a `B - 1` denominator.
    pub v_emp: f64,
    pub mse: f64,
    /// Mean estimated variance over empirical variance.
    pub vr: Option<f64>,
    /// Share of intervals covering `mu`.
    pub cp: Option<f64>,
    pub n: usize,
}

pub fn compute_metrics(
    estimates: &[f64],
    variance_estimates: Option<&[f64]>,
    ci_hits: Option<&[bool]>,
    mu_true: f64,
) -> Result<Metrics> {
    let b = estimates.len();
    if b < 2 {
        return Err(Error::InsufficientReplicates { needed: 2, got: b });
    }
    let bf = b as f64;
    let mean = estimates.iter().sum::<f64>() / bf;
    let v_emp = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (bf - 1.0);
    let mse = estimates.iter().map(|e| (e - mu_true).powi(2)).sum::<f64>() / bf;
    let vr = variance_estimates.and_then(|v| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (v_emp > 0.0 && !v.is_empty()).then(|| m / v_emp)
    });
    let cp = ci_hits
        .filter(|h| !h.is_empty())
        .map(|h| h.iter().filter(|&&x| x).count() as f64 / h.len() as f64);
    Ok(Metrics {
        pct_rb: 100.0 * (mean - mu_true) / mu_true,
        v_emp,
        mse,
        vr,
        cp,
        n: b,
    })
}
