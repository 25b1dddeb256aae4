//! Brute-force grid search of the score norm on small pooled instances.

use propweight::data::{build_pooled_matrix, CohortSample, DesignInfo, SurveySample, SurveyWeightRule};
use propweight::linalg::Matrix;
use propweight::propensity::{
    fit_clw_score, fit_pooled_logistic, scaled_score_norm, score_at, FitFlavor, PropensityFit, SolverConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub cohort: CohortSample<f64>,
    pub survey: SurveySample<f64>,
}

/// Cohort rows are repeated in the survey (with weights above one) so both systems have a
/// finite root. At most 12 pooled rows and 3 coefficients.
pub fn instance(rng: &mut ChaCha8Rng) -> Instance {
    let p = rng.random_range(1..=3);
    let n_c = rng.random_range(p.max(2)..=5);
    let extra = rng.random_range(2..=12 - 2 * n_c);
    let row = |rng: &mut ChaCha8Rng| {
        let mut r = vec![1.0];
        r.extend((1..p).map(|_| rng.random_range(-1.0..1.0)));
        r
    };
    let cohort_rows: Vec<Vec<f64>> = (0..n_c).map(|_| row(rng)).collect();
    let mut survey_rows = cohort_rows.clone();
    survey_rows.extend((0..extra).map(|_| row(rng)));
    let d: Vec<f64> = survey_rows.iter().map(|_| rng.random_range(1.5..4.0)).collect();
    let y = vec![0.0; n_c];
    Instance {
        cohort: CohortSample::new(y, Matrix::from_rows(&cohort_rows).unwrap()).unwrap(),
        survey: SurveySample::new(Matrix::from_rows(&survey_rows).unwrap(), d, DesignInfo::poisson()).unwrap(),
    }
}

pub fn norm(flavor: FitFlavor, coef: &[f64], inst: &Instance) -> f64 {
    score_at(flavor, coef, &inst.cohort, &inst.survey, 1.0)
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}

/// Coarse grid over [-5, 5]^p, then repeated local refinement around the best point.
pub fn grid_minimizer(flavor: FitFlavor, p: usize, inst: &Instance) -> Vec<f64> {
    let mut center = vec![0.0; p];
    let mut half = 5.0;
    let mut steps = 40;
    while half > 1e-7 {
        let h = 2.0 * half / steps as f64;
        let mut best = (f64::INFINITY, center.clone());
        let total = (steps + 1_usize).pow(p as u32);
        for k in 0..total {
            let mut rem = k;
            let point: Vec<f64> = (0..p)
                .map(|j| {
                    let idx = rem % (steps + 1);
                    rem /= steps + 1;
                    (center[j] - half + idx as f64 * h).clamp(-5.0, 5.0)
                })
                .collect();
            let v = norm(flavor, &point, inst);
            if v < best.0 {
                best = (v, point);
            }
        }
        center = best.1;
        half = 2.0 * h;
        steps = 20;
    }
    center
}

pub fn fit(flavor: FitFlavor, inst: &Instance) -> propweight::Result<PropensityFit<f64>> {
    let cfg = SolverConfig::default();
    match flavor {
        FitFlavor::PooledMembership => {
            let pooled = build_pooled_matrix(&inst.cohort, &inst.survey, SurveyWeightRule::Identity)?;
            fit_pooled_logistic(&pooled, &cfg)
        }
        FitFlavor::ClwScore => fit_clw_score(&inst.cohort, &inst.survey, &cfg),
    }
}

#[derive(Debug)]
pub struct Comparison {
    pub seed: u64,
    pub solver: Vec<f64>,
    pub grid: Vec<f64>,
    /// Largest coefficient gap; `INFINITY` when the solver failed.
    pub max_gap: f64,
    pub scaled_score: f64,
}

/// `None` when the search box holds no root, so the instance cannot serve as an oracle.
pub fn compare(flavor: FitFlavor, seed: u64) -> Option<Comparison> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inst = instance(&mut rng);
    let grid = grid_minimizer(flavor, inst.cohort.n_covariates(), &inst);
    if norm(flavor, &grid, &inst) > 1e-6 {
        return None;
    }
    Some(match fit(flavor, &inst) {
        Ok(f) => Comparison {
            seed,
            max_gap: f.beta.iter().zip(&grid).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max),
            scaled_score: scaled_score_norm(flavor, &f.beta, &inst.cohort, &inst.survey, 1.0),
            solver: f.beta,
            grid,
        },
        Err(_) => Comparison {
            seed,
            solver: Vec::new(),
            grid,
            max_gap: f64::INFINITY,
            scaled_score: f64::INFINITY,
        },
    })
}

/// The first `count` usable instances.
pub fn compare_many(flavor: FitFlavor, count: usize) -> Vec<Comparison> {
    let mut out = Vec::with_capacity(count);
    let mut seed = 0;
    while out.len() < count {
        out.extend(compare(flavor, seed));
        seed += 1;
        assert!(seed < 10 * count as u64 + 100, "too many rejected instances");
    }
    out
}
