//! Sample containers, design metadata and pooled model-matrix construction.
//!
//! Covariate matrices always carry an explicit intercept column of ones in position 0.
//! Nothing in the crate adds it implicitly; the scaled-weight estimator relies on knowing
//! exactly which coefficient is the intercept.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Nonprobability (volunteer) sample. Every unit carries an implicit weight of one.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortSample<T> {
    y: Vec<T>,
    x: Matrix<T>,
}

impl<T: Scalar> CohortSample<T> {
    /// Checks shapes only; content checks live in [`validate_paired_samples`].
    pub fn new(y: Vec<T>, x: Matrix<T>) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::EmptyInput("cohort has no units"));
        }
        if x.rows() != y.len() {
            return Err(Error::Shape(format!(
                "cohort outcome has {} values but covariate matrix has {} rows",
                y.len(),
                x.rows()
            )));
        }
        if x.cols() == 0 {
            return Err(Error::Shape("cohort covariate matrix has no columns".into()));
        }
        Ok(Self { y, x })
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    pub fn x(&self) -> &Matrix<T> {
        &self.x
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_covariates(&self) -> usize {
        self.x.cols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DesignKind {
    /// Independent Bernoulli inclusion with unit-specific probabilities `1 / d_i`.
    PoissonSampling,
    /// Stratified multistage cluster sample, PSUs treated as drawn with replacement.
    StratifiedClusterWR,
    /// No design labels: every unit is its own PSU in a single stratum.
    IidApprox,
}

impl fmt::Display for DesignKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DesignKind::PoissonSampling => "poisson",
            DesignKind::StratifiedClusterWR => "stratified",
            DesignKind::IidApprox => "iid",
        })
    }
}

/// Survey design metadata. PSU labels are nested within strata, so the same PSU label may
/// be reused in different strata.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignInfo {
    pub kind: DesignKind,
    pub stratum: Option<Vec<String>>,
    pub psu: Option<Vec<String>>,
}

impl DesignInfo {
    pub fn poisson() -> Self {
        Self {
            kind: DesignKind::PoissonSampling,
            stratum: None,
            psu: None,
        }
    }

    pub fn iid() -> Self {
        Self {
            kind: DesignKind::IidApprox,
            stratum: None,
            psu: None,
        }
    }

    pub fn stratified(stratum: Vec<String>, psu: Vec<String>) -> Self {
        Self {
            kind: DesignKind::StratifiedClusterWR,
            stratum: Some(stratum),
            psu: Some(psu),
        }
    }

    /// Groups unit indices by stratum, then by PSU, both in sorted label order.
    pub fn strata_groups(&self) -> Option<BTreeMap<&str, BTreeMap<&str, Vec<usize>>>> {
        let (strata, psus) = (self.stratum.as_ref()?, self.psu.as_ref()?);
        let mut groups: BTreeMap<&str, BTreeMap<&str, Vec<usize>>> = BTreeMap::new();
        for (i, (h, l)) in strata.iter().zip(psus).enumerate() {
            groups
                .entry(h.as_str())
                .or_default()
                .entry(l.as_str())
                .or_default()
                .push(i);
        }
        Some(groups)
    }
}

/// Reference probability sample with design weights `d_i = 1 / pi_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurveySample<T> {
    x: Matrix<T>,
    d: Vec<T>,
    design: DesignInfo,
    y: Option<Vec<T>>,
}

impl<T: Scalar> SurveySample<T> {
    pub fn new(x: Matrix<T>, d: Vec<T>, design: DesignInfo) -> Result<Self> {
        if x.rows() != d.len() {
            return Err(Error::Shape(format!(
                "survey has {} design weights but {} covariate rows",
                d.len(),
                x.rows()
            )));
        }
        Ok(Self { x, d, design, y: None })
    }

    /// Attaches the survey's own outcome, used as a reference estimate.
    pub fn with_outcome(mut self, y: Vec<T>) -> Result<Self> {
        if y.len() != self.d.len() {
            return Err(Error::Shape(format!(
                "survey outcome has {} values, expected {}",
                y.len(),
                self.d.len()
            )));
        }
        self.y = Some(y);
        Ok(self)
    }

    pub fn x(&self) -> &Matrix<T> {
        &self.x
    }

    pub fn d(&self) -> &[T] {
        &self.d
    }

    pub fn design(&self) -> &DesignInfo {
        &self.design
    }

    pub fn y(&self) -> Option<&[T]> {
        self.y.as_deref()
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    /// Estimated population size `N_p = sum d_i`.
    pub fn weight_total(&self) -> T {
        self.d.iter().copied().sum()
    }

    /// Design-weighted mean of the survey outcome, when present.
    pub fn reference_mean(&self) -> Option<T> {
        let y = self.y.as_ref()?;
        let num: T = y.iter().zip(&self.d).map(|(&y, &d)| y * d).sum();
        Some(num / self.weight_total())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleSide {
    Cohort,
    Survey,
}

impl fmt::Display for SampleSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SampleSide::Cohort => "cohort",
            SampleSide::Survey => "survey",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    ColumnMismatch {
        cohort: usize,
        survey: usize,
    },
    EmptySurvey,
    MissingIntercept {
        side: SampleSide,
        row: usize,
    },
    NonFiniteOutcome {
        side: SampleSide,
        row: usize,
    },
    NonFiniteCovariate {
        side: SampleSide,
        row: usize,
        column: usize,
    },
    NonPositiveWeight {
        row: usize,
    },
    NonFiniteWeight {
        row: usize,
    },
    MissingDesignLabels,
    DesignLabelLength {
        expected: usize,
        strata: usize,
        psus: usize,
    },
    SinglePsuStratum {
        stratum: String,
        psus: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ColumnMismatch { cohort, survey } => {
                write!(
                    f,
                    "column mismatch: cohort has {cohort} covariate columns, survey has {survey}"
                )
            }
            Violation::EmptySurvey => write!(f, "survey has no units"),
            Violation::MissingIntercept { side, row } => {
                write!(f, "{side} row {row} does not have 1 in the intercept column")
            }
            Violation::NonFiniteOutcome { side, row } => {
                write!(f, "non-finite {side} outcome at row {row}")
            }
            Violation::NonFiniteCovariate { side, row, column } => {
                write!(f, "non-finite {side} covariate at row {row}, column {column}")
            }
            Violation::NonPositiveWeight { row } => write!(f, "nonpositive design weight at row {row}"),
            Violation::NonFiniteWeight { row } => write!(f, "non-finite design weight at row {row}"),
            Violation::MissingDesignLabels => {
                write!(f, "stratified design requires stratum and PSU labels")
            }
            Violation::DesignLabelLength { expected, strata, psus } => write!(
                f,
                "design labels cover {strata} strata / {psus} PSU entries, expected {expected} each"
            ),
            Violation::SinglePsuStratum { stratum, psus } => {
                write!(
                    f,
                    "stratum {stratum} has < 2 PSUs ({psus}); collapse it with a neighbouring stratum"
                )
            }
        }
    }
}

/// Outcome of [`validate_paired_samples`]. Empty means the pair is usable.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::Validation(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("ok");
        }
        let msgs: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
        f.write_str(&msgs.join("; "))
    }
}

fn check_matrix<T: Scalar>(x: &Matrix<T>, side: SampleSide, out: &mut Vec<Violation>) {
    for (row, r) in x.row_iter().enumerate() {
        if r[0] != T::one() {
            out.push(Violation::MissingIntercept { side, row });
        }
        if let Some(column) = r.iter().position(|v| !v.is_finite()) {
            out.push(Violation::NonFiniteCovariate { side, row, column });
        }
    }
}

/// Reports every content problem with a cohort/survey pair instead of stopping at the first.
pub fn validate_paired_samples<T: Scalar>(cohort: &CohortSample<T>, survey: &SurveySample<T>) -> ValidationReport {
    let mut v = Vec::new();
    if cohort.n_covariates() != survey.x().cols() {
        v.push(Violation::ColumnMismatch {
            cohort: cohort.n_covariates(),
            survey: survey.x().cols(),
        });
    }
    if survey.is_empty() {
        v.push(Violation::EmptySurvey);
    }
    for (row, y) in cohort.y().iter().enumerate() {
        if !y.is_finite() {
            v.push(Violation::NonFiniteOutcome {
                side: SampleSide::Cohort,
                row,
            });
        }
    }
    check_matrix(cohort.x(), SampleSide::Cohort, &mut v);
    check_matrix(survey.x(), SampleSide::Survey, &mut v);
    if let Some(y) = survey.y() {
        for (row, y) in y.iter().enumerate() {
            if !y.is_finite() {
                v.push(Violation::NonFiniteOutcome {
                    side: SampleSide::Survey,
                    row,
                });
            }
        }
    }
    for (row, &d) in survey.d().iter().enumerate() {
        if !d.is_finite() {
            v.push(Violation::NonFiniteWeight { row });
        } else if d <= T::zero() {
            v.push(Violation::NonPositiveWeight { row });
        }
    }
    let design = survey.design();
    if design.kind == DesignKind::StratifiedClusterWR {
        match (&design.stratum, &design.psu) {
            (Some(h), Some(l)) if h.len() == survey.len() && l.len() == survey.len() => {
                if let Some(groups) = design.strata_groups() {
                    for (stratum, psus) in groups {
                        if psus.len() < 2 {
                            v.push(Violation::SinglePsuStratum {
                                stratum: stratum.to_string(),
                                psus: psus.len(),
                            });
                        }
                    }
                }
            }
            (Some(h), Some(l)) => v.push(Violation::DesignLabelLength {
                expected: survey.len(),
                strata: h.len(),
                psus: l.len(),
            }),
            _ => v.push(Violation::MissingDesignLabels),
        }
    }
    ValidationReport { violations: v }
}

/// How survey design weights are transformed into fit weights for the pooled regression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SurveyWeightRule<T> {
    /// `d_i` unchanged (ALP, FDW).
    Identity,
    /// `d_i (N_p - n_c) / N_p`, so the survey represents the complement of the cohort (RDW).
    RdwRescale,
    /// `lambda d_i` (ALP.S, usually with `lambda = n_c / N_p`).
    Scaled(T),
}

impl<T: Scalar> SurveyWeightRule<T> {
    /// Multiplier applied to every survey design weight.
    pub fn factor(&self, n_cohort: usize, weight_total: T) -> Result<T> {
        match *self {
            SurveyWeightRule::Identity => Ok(T::one()),
            SurveyWeightRule::RdwRescale => {
                let n_c = T::count(n_cohort);
                if n_c >= weight_total {
                    return Err(Error::Rescale {
                        n_cohort,
                        n_hat_p: weight_total.to_f64_lossy(),
                    });
                }
                Ok((weight_total - n_c) / weight_total)
            }
            SurveyWeightRule::Scaled(lambda) => {
                if lambda > T::zero() && lambda.is_finite() {
                    Ok(lambda)
                } else {
                    Err(Error::Config(format!("lambda must be positive, got {lambda}")))
                }
            }
        }
    }
}

/// `lambda = n_c / sum d_i`: scaled survey weights then total the cohort size.
pub fn default_lambda<T: Scalar>(cohort: &CohortSample<T>, survey: &SurveySample<T>) -> T {
    T::count(cohort.len()) / survey.weight_total()
}

/// Cohort rows followed by survey rows, with membership indicator and fit weight.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledRows<T> {
    pub x: Matrix<T>,
    /// `R_i`: true for cohort rows.
    pub membership: Vec<bool>,
    pub fit_weight: Vec<T>,
    pub n_cohort: usize,
    /// Multiplier that was applied to the survey design weights.
    pub survey_factor: T,
}

impl<T: Scalar> PooledRows<T> {
    pub fn len(&self) -> usize {
        self.membership.len()
    }

    pub fn is_empty(&self) -> bool {
        self.membership.is_empty()
    }

    /// Splits back into (cohort rows, survey rows).
    pub fn split(&self) -> (Matrix<T>, Matrix<T>) {
        (
            self.x.slice_rows(0, self.n_cohort),
            self.x.slice_rows(self.n_cohort, self.len()),
        )
    }
}

pub fn build_pooled_matrix<T: Scalar>(
    cohort: &CohortSample<T>,
    survey: &SurveySample<T>,
    rule: SurveyWeightRule<T>,
) -> Result<PooledRows<T>> {
    let n_c = cohort.len();
    let factor = rule.factor(n_c, survey.weight_total())?;
    let x = cohort.x().vstack(survey.x())?;
    let mut membership = vec![true; n_c];
    membership.resize(n_c + survey.len(), false);
    let mut fit_weight = vec![T::one(); n_c];
    fit_weight.extend(survey.d().iter().map(|&d| d * factor));
    Ok(PooledRows {
        x,
        membership,
        fit_weight,
        n_cohort: n_c,
        survey_factor: factor,
    })
}
