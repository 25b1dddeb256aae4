//! Monte Carlo study of the estimators on a synthetic finite population.

pub mod calibrate;
pub mod config;
pub mod metrics;
pub mod monte_carlo;
pub mod population;
pub mod sampling;

pub use calibrate::{
    calibrate_participation_intercept, calibrate_survey_const, linear_predictor, participation_rates, Scenario,
    SurveyCalibration, PAPER_SLOPES,
};
pub use config::SimulationConfig;
pub use metrics::{compute_metrics, Metrics};
pub use monte_carlo::{
    run_monte_carlo, run_monte_carlo_on, write_report_csv, CellReport, MethodSummary, SimulationReport,
};
pub use population::{generate_population, FinitePopulation, PopulationConfig, ANALYTIC_MEAN};
pub use sampling::{poisson_sample, poisson_sample_with, replicate_rng};
