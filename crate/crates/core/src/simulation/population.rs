use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, ChiSquared, Distribution, Exp, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// `E[y]` under the generating recipe: `-0.5 - 1.15 + 1.33 + 4.298`.
pub const ANALYTIC_MEAN: f64 = 3.978;

/// Stream reserved for population generation; replicate streams use the low range.
const POPULATION_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationConfig {
    pub size: usize,
    pub seed: u64,
    pub outcome_sd: f64,
}

impl PopulationConfig {
    pub fn new(size: usize, seed: u64) -> Self {
        Self {
            size,
            seed,
            outcome_sd: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FinitePopulation {
    /// Intercept followed by `x1..x4`.
    pub x: Matrix<f64>,
    pub y: Vec<f64>,
    /// Finite-population mean of `y`.
    pub mu: f64,
}

impl FinitePopulation {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn covariate(&self, i: usize, k: usize) -> f64 {
        self.x.get(i, k)
    }
}

/// Draws the population:
///
/// ```text
/// x1 ~ Bernoulli(0.5)
/// x2 = U(0, 2) + 0.3 x1
/// x3 = Exp(1) + 0.2 (x1 + x2)
/// x4 = chi2(4) + 0.1 (x1 + x2 + x3)
/// y  ~ N(-x1 - x2 + x3 + x4, sd)
/// ```
pub fn generate_population(config: &PopulationConfig) -> Result<FinitePopulation> {
    if config.size < 1000 {
        return Err(Error::Config(format!(
            "population size must be at least 1000, got {}",
            config.size
        )));
    }
    if !(config.outcome_sd > 0.0 && config.outcome_sd.is_finite()) {
        return Err(Error::Config(format!(
            "outcome_sd must be positive, got {}",
            config.outcome_sd
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(POPULATION_STREAM);
    let v1 = Bernoulli::new(0.5).expect("valid probability");
    let v2 = Uniform::new(0.0, 2.0).expect("valid range");
    let v3 = Exp::new(1.0).expect("valid rate");
    let v4 = ChiSquared::new(4.0).expect("valid dof");
    let noise = Normal::new(0.0, config.outcome_sd).expect("valid sd");

    let n = config.size;
    let mut data = Vec::with_capacity(n * 5);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let x1 = if v1.sample(&mut rng) { 1.0 } else { 0.0 };
        let x2 = v2.sample(&mut rng) + 0.3 * x1;
        let x3 = v3.sample(&mut rng) + 0.2 * (x1 + x2);
        let x4 = v4.sample(&mut rng) + 0.1 * (x1 + x2 + x3);
        let e: f64 = noise.sample(&mut rng);
        data.extend_from_slice(&[1.0, x1, x2, x3, x4]);
        y.push(-x1 - x2 + x3 + x4 + e);
    }
    let mu = y.iter().sum::<f64>() / n as f64;
    Ok(FinitePopulation {
        x: Matrix::new(n, 5, data)?,
        y,
        mu,
    })
}

/// Uniform draw helper shared by the samplers.
pub(crate) fn unit<R: Rng>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}
