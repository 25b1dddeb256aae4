//! Estimating-equation solvers for the propensity models.
//!
//! Two systems are solved:
//!
//! * the pooled membership score `sum_{R=1} w (1 - p) x - sum_{R=0} w p x = 0`, a weighted
//!   logistic regression of the cohort indicator on the stacked cohort and survey rows. It
//!   backs RDW, FDW, ALP and ALP.S, which differ only in the survey fit weights;
//! * the CLW score `sum_{s_c} x - sum_{s_p} d pi(gamma) x = 0`, whose Jacobian involves the
//!   survey rows only.
//!
//! Both are solved by Newton iterations (IRLS for the pooled score) with step halving
//! whenever the Euclidean score norm fails to decrease. Convergence is judged on the
//! max-norm of the unnormalized score divided by `n_c + n_p`.

use serde::{Deserialize, Serialize};

use crate::data::{CohortSample, PooledRows, SurveySample};
use crate::error::{Error, Result};
use crate::linalg::{dot, max_abs, norm2, solve_spd, Matrix};
use crate::scalar::{expit, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig<T> {
    /// Tolerance on the max-norm of the score divided by `n_c + n_p`.
    pub tol: T,
    pub max_iter: usize,
    pub step_halving_max: usize,
    /// Starting coefficients; zeros when `None`.
    pub init: Option<Vec<T>>,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            // 1e-10 is below f32 resolution, so single precision gets a looser floor
            tol: T::lit(1e-10).max(T::epsilon() * T::lit(256.0)),
            max_iter: 50,
            step_halving_max: 20,
            init: None,
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > T::zero()) {
            return Err(Error::Config(format!(
                "solver tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitFlavor {
    PooledMembership,
    ClwScore,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropensityFit<T> {
    pub beta: Vec<T>,
    /// Pooled fits: membership probabilities `p_i`. CLW fits: participation rates `pi_i`.
    pub p_hat_cohort: Vec<T>,
    pub p_hat_survey: Vec<T>,
    pub flavor: FitFlavor,
    /// Multiplier applied to the survey design weights during the fit.
    pub lambda: T,
    pub iterations: usize,
    /// Max-norm of the scaled score at the solution.
    pub final_score_norm: T,
    /// Euclidean score norm at the start and after each accepted step.
    pub score_norm_trace: Vec<T>,
}

const SEPARATION_STEP: f64 = 0.05;

struct Evaluation<T> {
    score: Vec<T>,
    /// Negative Jacobian of the score; positive definite at regular points.
    information: Matrix<T>,
}

struct Solution<T> {
    coef: Vec<T>,
    iterations: usize,
    score_norm: T,
    trace: Vec<T>,
}

fn add_weighted_outer_lower<T: Scalar>(lower: &mut [T], x: &[T], s: T) {
    let mut k = 0;
    for i in 0..x.len() {
        let si = s * x[i];
        for &xj in &x[..=i] {
            lower[k] = lower[k] + si * xj;
            k += 1;
        }
    }
}

fn lower_to_matrix<T: Scalar>(lower: &[T], p: usize) -> Matrix<T> {
    let mut m = Matrix::zeros(p, p);
    let mut k = 0;
    for i in 0..p {
        for j in 0..=i {
            m.set(i, j, lower[k]);
            m.set(j, i, lower[k]);
            k += 1;
        }
    }
    m
}

fn newton<T, F>(p: usize, n_total: usize, config: &SolverConfig<T>, mut eval: F) -> Result<Solution<T>>
where
    T: Scalar,
    F: FnMut(&[T]) -> Evaluation<T>,
{
    config.validate()?;
    let mut coef = match &config.init {
        Some(init) if init.len() == p => init.clone(),
        Some(init) => {
            return Err(Error::Shape(format!(
                "initial coefficients have length {}, model has {p}",
                init.len()
            )))
        }
        None => vec![T::zero(); p],
    };
    let scale = T::count(n_total.max(1));
    let mut current = eval(&coef);
    let mut norm = norm2(&current.score);
    let mut trace = vec![norm];
    let mut iterations = 0;

    loop {
        let scaled = max_abs(&current.score) / scale;
        if scaled <= config.tol {
            // Under separation the score fades while the coefficients drift off to infinity;
            // a genuine root leaves only a negligible Newton correction.
            let drifting = match solve_spd(&current.information, &current.score) {
                Ok(step) => max_abs(&step) > T::lit(SEPARATION_STEP),
                Err(_) => true,
            };
            if drifting {
                return Err(Error::NonConvergence {
                    iterations,
                    score_norm: scaled.to_f64_lossy(),
                });
            }
            return Ok(Solution {
                coef,
                iterations,
                score_norm: scaled,
                trace,
            });
        }
        if iterations >= config.max_iter || !scaled.is_finite() {
            return Err(Error::NonConvergence {
                iterations,
                score_norm: scaled.to_f64_lossy(),
            });
        }
        let step = solve_spd(&current.information, &current.score)?;
        let mut t = T::one();
        let mut accepted = None;
        for _ in 0..=config.step_halving_max {
            let cand: Vec<T> = coef.iter().zip(&step).map(|(&c, &s)| c + t * s).collect();
            let e = eval(&cand);
            let n = norm2(&e.score);
            if n < norm {
                accepted = Some((cand, e, n));
                break;
            }
            t = t * T::lit(0.5);
        }
        let Some((cand, e, n)) = accepted else {
            return Err(Error::NonConvergence {
                iterations,
                score_norm: scaled.to_f64_lossy(),
            });
        };
        coef = cand;
        current = e;
        norm = n;
        trace.push(n);
        iterations += 1;
    }
}

fn pooled_eval<T: Scalar>(pooled: &PooledRows<T>, beta: &[T]) -> Evaluation<T> {
    let p = pooled.x.cols();
    let mut score = vec![T::zero(); p];
    let mut lower = vec![T::zero(); p * (p + 1) / 2];
    for ((x, &r), &w) in pooled.x.row_iter().zip(&pooled.membership).zip(&pooled.fit_weight) {
        let prob = expit(dot(x, beta));
        let resid = if r { w * (T::one() - prob) } else { -(w * prob) };
        for (s, &xi) in score.iter_mut().zip(x) {
            *s = *s + resid * xi;
        }
        add_weighted_outer_lower(&mut lower, x, w * prob * (T::one() - prob));
    }
    Evaluation {
        score,
        information: lower_to_matrix(&lower, p),
    }
}

fn check_open_unit<T: Scalar>(p: &[T], iterations: usize, score_norm: T) -> Result<()> {
    if p.iter().all(|&v| v > T::zero() && v < T::one()) {
        Ok(())
    } else {
        Err(Error::NonConvergence {
            iterations,
            score_norm: score_norm.to_f64_lossy(),
        })
    }
}

/// Weighted logistic pseudo-MLE on pooled cohort/survey rows.
pub fn fit_pooled_logistic<T: Scalar>(pooled: &PooledRows<T>, config: &SolverConfig<T>) -> Result<PropensityFit<T>> {
    if pooled.n_cohort == 0 || pooled.n_cohort == pooled.len() {
        return Err(Error::EmptyInput("pooled fit needs both cohort and survey rows"));
    }
    let sol = newton(pooled.x.cols(), pooled.len(), config, |b| pooled_eval(pooled, b))?;
    let probs: Vec<T> = pooled.x.row_iter().map(|x| expit(dot(x, &sol.coef))).collect();
    check_open_unit(&probs, sol.iterations, sol.score_norm)?;
    let p_hat_survey = probs[pooled.n_cohort..].to_vec();
    let mut p_hat_cohort = probs;
    p_hat_cohort.truncate(pooled.n_cohort);
    Ok(PropensityFit {
        beta: sol.coef,
        p_hat_cohort,
        p_hat_survey,
        flavor: FitFlavor::PooledMembership,
        lambda: pooled.survey_factor,
        iterations: sol.iterations,
        final_score_norm: sol.score_norm,
        score_norm_trace: sol.trace,
    })
}

fn column_totals<T: Scalar>(x: &Matrix<T>) -> Vec<T> {
    let mut tot = vec![T::zero(); x.cols()];
    for r in x.row_iter() {
        for (t, &v) in tot.iter_mut().zip(r) {
            *t = *t + v;
        }
    }
    tot
}

fn clw_eval<T: Scalar>(cohort_total: &[T], survey: &SurveySample<T>, gamma: &[T]) -> Evaluation<T> {
    let p = cohort_total.len();
    let mut score = cohort_total.to_vec();
    let mut lower = vec![T::zero(); p * (p + 1) / 2];
    for (x, &d) in survey.x().row_iter().zip(survey.d()) {
        let pi = expit(dot(x, gamma));
        let dp = d * pi;
        for (s, &xi) in score.iter_mut().zip(x) {
            *s = *s - dp * xi;
        }
        add_weighted_outer_lower(&mut lower, x, dp * (T::one() - pi));
    }
    Evaluation {
        score,
        information: lower_to_matrix(&lower, p),
    }
}

/// Solves the CLW pseudo-score for the logistic participation model.
pub fn fit_clw_score<T: Scalar>(
    cohort: &CohortSample<T>,
    survey: &SurveySample<T>,
    config: &SolverConfig<T>,
) -> Result<PropensityFit<T>> {
    if survey.is_empty() {
        return Err(Error::EmptyInput("CLW fit needs survey rows"));
    }
    let p = cohort.n_covariates();
    if survey.x().cols() != p {
        return Err(Error::Shape(format!(
            "cohort has {p} covariate columns, survey has {}",
            survey.x().cols()
        )));
    }
    let cohort_total = column_totals(cohort.x());
    let mut last = vec![T::zero(); p];
    let result = newton(p, cohort.len() + survey.len(), config, |g| {
        last.copy_from_slice(g);
        clw_eval(&cohort_total, survey, g)
    });
    let sol = match result {
        Ok(sol) => sol,
        Err(e @ (Error::NonConvergence { .. } | Error::SingularSystem { .. })) => {
            // totals beyond reach push the survey rates to one
            let saturated = survey
                .x()
                .row_iter()
                .any(|x| expit(dot(x, &last)) > T::one() - T::lit(1e-6));
            return Err(if saturated { Error::InfeasibleTotals } else { e });
        }
        Err(e) => return Err(e),
    };
    let p_hat_cohort: Vec<T> = cohort.x().row_iter().map(|x| expit(dot(x, &sol.coef))).collect();
    let p_hat_survey: Vec<T> = survey.x().row_iter().map(|x| expit(dot(x, &sol.coef))).collect();
    check_open_unit(&p_hat_cohort, sol.iterations, sol.score_norm)?;
    Ok(PropensityFit {
        beta: sol.coef,
        p_hat_cohort,
        p_hat_survey,
        flavor: FitFlavor::ClwScore,
        lambda: T::one(),
        iterations: sol.iterations,
        final_score_norm: sol.score_norm,
        score_norm_trace: sol.trace,
    })
}

/// Raw (unnormalized) estimating-equation value at `coef`.
///
/// For [`FitFlavor::PooledMembership`] the survey design weights are multiplied by `lambda`
/// (1 for ALP/FDW, the rescale factor for RDW, the scaling constant for ALP.S). `lambda` is
/// ignored for the CLW score.
pub fn score_at<T: Scalar>(
    flavor: FitFlavor,
    coef: &[T],
    cohort: &CohortSample<T>,
    survey: &SurveySample<T>,
    lambda: T,
) -> Vec<T> {
    let p = coef.len();
    let mut score = vec![T::zero(); p];
    match flavor {
        FitFlavor::PooledMembership => {
            for x in cohort.x().row_iter() {
                let q = T::one() - expit(dot(x, coef));
                for (s, &xi) in score.iter_mut().zip(x) {
                    *s = *s + q * xi;
                }
            }
            for (x, &d) in survey.x().row_iter().zip(survey.d()) {
                let q = lambda * d * expit(dot(x, coef));
                for (s, &xi) in score.iter_mut().zip(x) {
                    *s = *s - q * xi;
                }
            }
        }
        FitFlavor::ClwScore => {
            for x in cohort.x().row_iter() {
                for (s, &xi) in score.iter_mut().zip(x) {
                    *s = *s + xi;
                }
            }
            for (x, &d) in survey.x().row_iter().zip(survey.d()) {
                let q = d * expit(dot(x, coef));
                for (s, &xi) in score.iter_mut().zip(x) {
                    *s = *s - q * xi;
                }
            }
        }
    }
    score
}

/// `score_at` scaled by `1 / (n_c + n_p)` and reduced to its max-norm.
pub fn scaled_score_norm<T: Scalar>(
    flavor: FitFlavor,
    coef: &[T],
    cohort: &CohortSample<T>,
    survey: &SurveySample<T>,
    lambda: T,
) -> T {
    max_abs(&score_at(flavor, coef, cohort, survey, lambda)) / T::count(cohort.len() + survey.len())
}
