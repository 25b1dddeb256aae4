//! Taylor-linearization variance of pseudo-weighted means.
//!
//! Every estimator's variance splits into a cohort part (Poisson-type participation of the
//! nonprobability sample) and a design part `b' D b` carrying the uncertainty of the
//! propensity coefficients through the survey design.

use serde::Serialize;

use crate::data::{CohortSample, DesignKind, SurveySample};
use crate::error::{Error, Result};
use crate::linalg::{dot, solve_spd, Matrix};
use crate::propensity::PropensityFit;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceBreakdown<T> {
    pub v_cohort: T,
    pub v_design: T,
    pub v_total: T,
    pub b_hat: Vec<T>,
    /// Sum of cohort pseudo-weights.
    pub n_hat_c: T,
    /// Sum of survey fit weights.
    pub n_hat_p: T,
    /// Set when the cohort component came out negative.
    pub negative_component: bool,
}

impl<T: Scalar> VarianceBreakdown<T> {
    fn assemble(v_cohort: T, v_design: T, b_hat: Vec<T>, n_hat_c: T, n_hat_p: T) -> Self {
        Self {
            v_cohort,
            v_design,
            v_total: v_cohort + v_design,
            b_hat,
            n_hat_c,
            n_hat_p,
            negative_component: v_cohort < T::zero(),
        }
    }
}

fn sum<T: Scalar>(v: &[T]) -> T {
    v.iter().copied().sum()
}

/// Linearization coefficient of the ALP-type mean.
///
/// With `weights = None` this is `{sum (y - mu) x'}{sum p x x'}^-1`; with pseudo-weights `w`
/// each cohort term is multiplied by `w_i`.
pub fn compute_b_hat<T: Scalar>(
    cohort: &CohortSample<T>,
    p_hat_cohort: &[T],
    weights: Option<&[T]>,
    mu_hat: T,
) -> Result<Vec<T>> {
    let p = cohort.n_covariates();
    let mut lhs = Matrix::zeros(p, p);
    let mut rhs = vec![T::zero(); p];
    for (i, x) in cohort.x().row_iter().enumerate() {
        let w = weights.map_or(T::one(), |w| w[i]);
        let r = w * (cohort.y()[i] - mu_hat);
        for (b, &xi) in rhs.iter_mut().zip(x) {
            *b = *b + r * xi;
        }
        lhs.add_outer(x, w * p_hat_cohort[i]);
    }
    solve_spd(&lhs, &rhs)
}

/// `N_c^-2 sum (1 - p)(1 - 2p){(y - mu)/p - b'x}^2` with `N_c = sum weights`.
pub fn variance_cohort_component<T: Scalar>(
    cohort: &CohortSample<T>,
    p_hat_cohort: &[T],
    weights: &[T],
    mu_hat: T,
    b_hat: &[T],
) -> T {
    let n_hat = sum(weights);
    let two = T::lit(2.0);
    let total: T = cohort
        .x()
        .row_iter()
        .zip(cohort.y())
        .zip(p_hat_cohort)
        .map(|((x, &y), &p)| {
            let e = (y - mu_hat) / p - dot(b_hat, x);
            (T::one() - p) * (T::one() - two * p) * e * e
        })
        .sum();
    total / (n_hat * n_hat)
}

/// Rows `z_i = c_i x_i` of the survey sample.
pub fn scaled_survey_rows<T: Scalar>(survey: &SurveySample<T>, coef: &[T]) -> Matrix<T> {
    let x = survey.x();
    let mut data = Vec::with_capacity(x.rows() * x.cols());
    for (row, &c) in x.row_iter().zip(coef) {
        data.extend(row.iter().map(|&v| c * v));
    }
    Matrix::new(x.rows(), x.cols(), data).expect("shape preserved")
}

fn centered_cross_products<T: Scalar>(rows: &[Vec<T>], p: usize) -> Matrix<T> {
    let k = T::count(rows.len());
    let mut mean = vec![T::zero(); p];
    for r in rows {
        for (m, &v) in mean.iter_mut().zip(r) {
            *m = *m + v / k;
        }
    }
    let mut out = Matrix::zeros(p, p);
    let mut dev = vec![T::zero(); p];
    for r in rows {
        for ((d, &v), &m) in dev.iter_mut().zip(r).zip(&mean) {
            *d = v - m;
        }
        out.add_outer(&dev, T::one());
    }
    out
}

/// Design-based covariance of the survey total `sum_{s_p} z_i`, before normalization.
pub fn design_total_covariance<T: Scalar>(survey: &SurveySample<T>, z: &Matrix<T>) -> Result<Matrix<T>> {
    let p = z.cols();
    match survey.design().kind {
        DesignKind::PoissonSampling => {
            let mut out = Matrix::zeros(p, p);
            for (i, (row, &d)) in z.row_iter().zip(survey.d()).enumerate() {
                if !(d >= T::one()) {
                    return Err(Error::Design(format!(
                        "Poisson design needs weights >= 1, row {i} has {d}"
                    )));
                }
                out.add_outer(row, T::one() - T::one() / d);
            }
            Ok(out)
        }
        DesignKind::IidApprox => {
            let n = z.rows();
            if n < 2 {
                return Err(Error::Design("iid approximation needs at least 2 survey units".into()));
            }
            let rows: Vec<Vec<T>> = z.row_iter().map(<[T]>::to_vec).collect();
            let mut out = centered_cross_products(&rows, p);
            out.scale(T::count(n) / T::count(n - 1));
            Ok(out)
        }
        DesignKind::StratifiedClusterWR => {
            let groups = survey
                .design()
                .strata_groups()
                .ok_or_else(|| Error::Design("stratified design needs stratum and PSU labels".into()))?;
            let mut out = Matrix::zeros(p, p);
            for (stratum, psus) in groups {
                let a = psus.len();
                if a < 2 {
                    return Err(Error::Design(format!(
                        "stratum {stratum} has {a} PSU; collapse strata before estimation"
                    )));
                }
                let totals: Vec<Vec<T>> = psus
                    .values()
                    .map(|idx| {
                        let mut t = vec![T::zero(); p];
                        for &i in idx {
                            for (s, &v) in t.iter_mut().zip(z.row(i)) {
                                *s = *s + v;
                            }
                        }
                        t
                    })
                    .collect();
                let mut block = centered_cross_products(&totals, p);
                block.scale(T::count(a) / T::count(a - 1));
                for (o, &b) in out.as_mut_slice().iter_mut().zip(block.as_slice()) {
                    *o = *o + b;
                }
            }
            Ok(out)
        }
    }
}

fn normalized_design_matrix<T: Scalar>(
    survey: &SurveySample<T>,
    fit_weights: &[T],
    p_hat_survey: &[T],
) -> Result<Matrix<T>> {
    let coef: Vec<T> = fit_weights.iter().zip(p_hat_survey).map(|(&w, &p)| w * p).collect();
    let z = scaled_survey_rows(survey, &coef);
    let mut m = design_total_covariance(survey, &z)?;
    let n_hat = sum(fit_weights);
    m.scale(T::one() / (n_hat * n_hat));
    Ok(m)
}

fn require_kind<T: Scalar>(survey: &SurveySample<T>, kind: DesignKind) -> Result<()> {
    if survey.design().kind == kind {
        Ok(())
    } else {
        Err(Error::Design(format!(
            "survey design is {}, expected {kind}",
            survey.design().kind
        )))
    }
}

/// `D = N_p^-2 sum_h a_h/(a_h - 1) sum_l (z_l - zbar_h)(z_l - zbar_h)'` over PSU totals
/// `z_l = sum_{i in l} w_i p_i x_i`, where `w` are the survey fit weights.
pub fn design_variance_stratified<T: Scalar>(
    survey: &SurveySample<T>,
    fit_weights: &[T],
    p_hat_survey: &[T],
) -> Result<Matrix<T>> {
    require_kind(survey, DesignKind::StratifiedClusterWR)?;
    normalized_design_matrix(survey, fit_weights, p_hat_survey)
}

/// Poisson plug-in `N_p^-2 sum (1 - 1/d_i) z_i z_i'` with `z_i = w_i p_i x_i`; for `w = d`
/// this is `N_p^-2 sum d(d - 1) p^2 x x'`.
pub fn design_variance_poisson<T: Scalar>(
    survey: &SurveySample<T>,
    fit_weights: &[T],
    p_hat_survey: &[T],
) -> Result<Matrix<T>> {
    require_kind(survey, DesignKind::PoissonSampling)?;
    normalized_design_matrix(survey, fit_weights, p_hat_survey)
}

/// Each survey unit treated as its own PSU in a single with-replacement stratum.
pub fn design_variance_iid<T: Scalar>(
    survey: &SurveySample<T>,
    fit_weights: &[T],
    p_hat_survey: &[T],
) -> Result<Matrix<T>> {
    require_kind(survey, DesignKind::IidApprox)?;
    normalized_design_matrix(survey, fit_weights, p_hat_survey)
}

/// ALP-type variance for a pooled fit: cohort component plus `b' D b`, with `D` chosen by
/// the survey design and the survey fit weights `lambda * d` taken from the fit.
pub fn tl_variance<T: Scalar>(
    cohort: &CohortSample<T>,
    survey: &SurveySample<T>,
    fit: &PropensityFit<T>,
    weights: &[T],
    mu_hat: T,
) -> Result<VarianceBreakdown<T>> {
    let b_hat = compute_b_hat(cohort, &fit.p_hat_cohort, Some(weights), mu_hat)?;
    let v_cohort = variance_cohort_component(cohort, &fit.p_hat_cohort, weights, mu_hat, &b_hat);
    let fit_weights: Vec<T> = survey.d().iter().map(|&d| fit.lambda * d).collect();
    let dmat = normalized_design_matrix(survey, &fit_weights, &fit.p_hat_survey)?;
    let v_design = dmat.quad_form(&b_hat);
    Ok(VarianceBreakdown::assemble(
        v_cohort,
        v_design,
        b_hat,
        sum(weights),
        sum(&fit_weights),
    ))
}

/// Ingredients of a linearization around the estimating equations `S(theta) = 0`.
///
/// The mean's influence on cohort unit `i` is `w_i (y_i - mu) + c_i b'x_i` with
/// `b = H^-1 sum_c (y - mu) dw/dtheta`, `H = -dS/dtheta`, and the survey part of `S` is
/// `-sum_{s_p} z_i`.
pub struct Linearization<'a, T> {
    pub cohort: &'a CohortSample<T>,
    pub survey: &'a SurveySample<T>,
    pub weights: &'a [T],
    pub mu_hat: T,
    /// `dw_i/dtheta`, one row per cohort unit.
    pub weight_gradient: Matrix<T>,
    /// Multiplier `c_i` of `x_i` in the cohort part of the score.
    pub score_coef: Vec<T>,
    pub information: Matrix<T>,
    /// Estimated participation rates of the cohort units.
    pub pi_hat: Vec<T>,
    /// Survey rows `z_i`.
    pub z: Matrix<T>,
    /// Sum of survey fit weights, reported only.
    pub n_hat_p: T,
}

pub fn linearized_variance<T: Scalar>(lin: &Linearization<'_, T>) -> Result<VarianceBreakdown<T>> {
    let p = lin.cohort.n_covariates();
    let mut j = vec![T::zero(); p];
    for (g, &y) in lin.weight_gradient.row_iter().zip(lin.cohort.y()) {
        let r = y - lin.mu_hat;
        for (a, &v) in j.iter_mut().zip(g) {
            *a = *a + r * v;
        }
    }
    let b_hat = solve_spd(&lin.information, &j)?;
    let n_hat_c = sum(lin.weights);
    let norm = T::one() / (n_hat_c * n_hat_c);
    let cohort_sum: T = lin
        .cohort
        .x()
        .row_iter()
        .zip(lin.cohort.y())
        .zip(lin.weights)
        .zip(&lin.score_coef)
        .zip(&lin.pi_hat)
        .map(|((((x, &y), &w), &c), &pi)| {
            let e = w * (y - lin.mu_hat) + c * dot(&b_hat, x);
            (T::one() - pi) * e * e
        })
        .sum();
    let cov = design_total_covariance(lin.survey, &lin.z)?;
    Ok(VarianceBreakdown::assemble(
        cohort_sum * norm,
        cov.quad_form(&b_hat) * norm,
        b_hat,
        n_hat_c,
        lin.n_hat_p,
    ))
}

fn add_weighted_outers<T: Scalar>(m: &mut Matrix<T>, x: &Matrix<T>, coef: impl Iterator<Item = T>) {
    for (row, c) in x.row_iter().zip(coef) {
        m.add_outer(row, c);
    }
}

/// Linearized variance of the CLW mean with `w = 1 + exp(-gamma'x)`.
pub fn clw_variance<T: Scalar>(
    cohort: &CohortSample<T>,
    survey: &SurveySample<T>,
    fit: &PropensityFit<T>,
    weights: &[T],
    mu_hat: T,
) -> Result<VarianceBreakdown<T>> {
    let p = cohort.n_covariates();
    let mut info = Matrix::zeros(p, p);
    add_weighted_outers(
        &mut info,
        survey.x(),
        survey
            .d()
            .iter()
            .zip(&fit.p_hat_survey)
            .map(|(&d, &pi)| d * pi * (T::one() - pi)),
    );
    let grad = scaled_rows(cohort.x(), weights.iter().map(|&w| -(w - T::one())));
    let zc: Vec<T> = survey
        .d()
        .iter()
        .zip(&fit.p_hat_survey)
        .map(|(&d, &pi)| d * pi)
        .collect();
    linearized_variance(&Linearization {
        cohort,
        survey,
        weights,
        mu_hat,
        weight_gradient: grad,
        score_coef: vec![T::one(); cohort.len()],
        information: info,
        pi_hat: fit.p_hat_cohort.clone(),
        z: scaled_survey_rows(survey, &zc),
        n_hat_p: survey.weight_total(),
    })
}

/// Linearized variance of the ALP.S mean with `w = exp(-beta_1'x)` (intercept in column 0).
pub fn alps_variance<T: Scalar>(
    cohort: &CohortSample<T>,
    survey: &SurveySample<T>,
    fit: &PropensityFit<T>,
    weights: &[T],
    mu_hat: T,
) -> Result<VarianceBreakdown<T>> {
    let p = cohort.n_covariates();
    let lambda = fit.lambda;
    let mut info = Matrix::zeros(p, p);
    add_weighted_outers(
        &mut info,
        cohort.x(),
        fit.p_hat_cohort.iter().map(|&q| q * (T::one() - q)),
    );
    add_weighted_outers(
        &mut info,
        survey.x(),
        survey
            .d()
            .iter()
            .zip(&fit.p_hat_survey)
            .map(|(&d, &q)| lambda * d * q * (T::one() - q)),
    );
    let mut grad = scaled_rows(cohort.x(), weights.iter().map(|&w| -w));
    for i in 0..grad.rows() {
        grad.set(i, 0, T::zero());
    }
    let pi_hat = fit
        .p_hat_cohort
        .iter()
        .map(|&q| (lambda * q / (T::one() - q)).min(T::one()))
        .collect();
    let zc: Vec<T> = survey
        .d()
        .iter()
        .zip(&fit.p_hat_survey)
        .map(|(&d, &q)| lambda * d * q)
        .collect();
    linearized_variance(&Linearization {
        cohort,
        survey,
        weights,
        mu_hat,
        weight_gradient: grad,
        score_coef: fit.p_hat_cohort.iter().map(|&q| T::one() - q).collect(),
        information: info,
        pi_hat,
        z: scaled_survey_rows(survey, &zc),
        n_hat_p: lambda * survey.weight_total(),
    })
}

/// ALP.S variance by literal substitution into the ALP formula: weights `lambda d` and
/// probabilities `exp(beta_lambda'x)` in place of `d` and `p`.
pub fn alps_substitution_variance<T: Scalar>(
    cohort: &CohortSample<T>,
    survey: &SurveySample<T>,
    fit: &PropensityFit<T>,
    weights: &[T],
    mu_hat: T,
) -> Result<VarianceBreakdown<T>> {
    let odds = |x: &[T]| dot(x, &fit.beta).exp();
    let p_c: Vec<T> = cohort.x().row_iter().map(odds).collect();
    let p_s: Vec<T> = survey.x().row_iter().map(odds).collect();
    let b_hat = compute_b_hat(cohort, &p_c, Some(weights), mu_hat)?;
    let v_cohort = variance_cohort_component(cohort, &p_c, weights, mu_hat, &b_hat);
    let fit_weights: Vec<T> = survey.d().iter().map(|&d| fit.lambda * d).collect();
    let dmat = normalized_design_matrix(survey, &fit_weights, &p_s)?;
    let v_design = dmat.quad_form(&b_hat);
    Ok(VarianceBreakdown::assemble(
        v_cohort,
        v_design,
        b_hat,
        sum(weights),
        sum(&fit_weights),
    ))
}

/// Variance of the Hájek mean under Poisson participation with known rates `pi`,
/// weights `1/pi` held fixed.
pub fn tw_variance<T: Scalar>(cohort: &CohortSample<T>, pi: &[T], mu_hat: T) -> VarianceBreakdown<T> {
    let n_hat: T = pi.iter().map(|&p| T::one() / p).sum();
    let total: T = cohort
        .y()
        .iter()
        .zip(pi)
        .map(|(&y, &p)| {
            let r = y - mu_hat;
            (T::one() - p) / (p * p) * r * r
        })
        .sum();
    VarianceBreakdown::assemble(total / (n_hat * n_hat), T::zero(), Vec::new(), n_hat, T::zero())
}

fn scaled_rows<T: Scalar>(x: &Matrix<T>, coef: impl Iterator<Item = T>) -> Matrix<T> {
    let mut data = Vec::with_capacity(x.rows() * x.cols());
    for (row, c) in x.row_iter().zip(coef) {
        data.extend(row.iter().map(|&v| c * v));
    }
    Matrix::new(x.rows(), x.cols(), data).expect("shape preserved")
}
