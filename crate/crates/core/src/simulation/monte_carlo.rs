use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{CohortSample, DesignInfo, SurveySample};
use crate::error::{Error, Result};
use crate::estimators::{estimate_methods, EstimateWarning, Method, MethodSpec, Z_95};
use crate::propensity::SolverConfig;

use super::calibrate::{
    calibrate_participation_intercept, calibrate_survey_const, linear_predictor, participation_rates, Scenario,
};
use super::config::SimulationConfig;
use super::metrics::{compute_metrics, Metrics};
use super::population::{generate_population, unit, FinitePopulation, PopulationConfig};
use super::sampling::replicate_rng;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: Method,
    /// `None` when fewer than two replicates succeeded.
    pub metrics: Option<Metrics>,
    pub n_failed: usize,
    pub failures: BTreeMap<String, usize>,
    /// Cohort units with estimated participation above one, summed over replicates.
    pub pi_above_one: usize,
    /// Replicates whose cohort variance component was negative.
    pub negative_component: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellReport {
    pub scenario: Scenario,
    pub f_c: f64,
    pub intercept: f64,
    pub max_participation: f64,
    pub mean_cohort_size: f64,
    pub mean_survey_size: f64,
    pub methods: Vec<MethodSummary>,
}

impl CellReport {
    pub fn method(&self, m: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub population_size: usize,
    pub seed: u64,
    pub replicates: usize,
    pub population_mean: f64,
    pub survey_const: f64,
    pub survey_clipped: usize,
    pub cells: Vec<CellReport>,
}

impl SimulationReport {
    pub fn cell(&self, scenario: Scenario, f_c: f64) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.scenario == scenario && c.f_c == f_c)
    }
}

#[derive(Clone)]
struct MethodDraw {
    mu_hat: f64,
    var_hat: Option<f64>,
    pi_above_one: usize,
    negative_component: bool,
}

struct ReplicateOutcome {
    n_cohort: usize,
    n_survey: usize,
    draws: Vec<std::result::Result<MethodDraw, &'static str>>,
}

struct CellInputs<'a> {
    pop: &'a FinitePopulation,
    pi_c: Vec<f64>,
    pi_p: &'a [f64],
    specs: Vec<MethodSpec<f64>>,
    solver: SolverConfig<f64>,
}

fn run_replicate(inputs: &CellInputs<'_>, seed: u64, cell: usize, replicate: usize) -> ReplicateOutcome {
    let mut rng = replicate_rng(seed, cell, replicate);
    let cohort_idx: Vec<usize> = (0..inputs.pop.len())
        .filter(|&i| unit(&mut rng) < inputs.pi_c[i])
        .collect();
    let survey_idx: Vec<usize> = (0..inputs.pop.len())
        .filter(|&i| unit(&mut rng) < inputs.pi_p[i])
        .collect();
    let n_cohort = cohort_idx.len();
    let n_survey = survey_idx.len();
    let failed = |kind: &'static str| ReplicateOutcome {
        n_cohort,
        n_survey,
        draws: vec![Err(kind); inputs.specs.len()],
    };
    if n_cohort == 0 || n_survey == 0 {
        return failed("EmptyInput");
    }

    let y: Vec<f64> = cohort_idx.iter().map(|&i| inputs.pop.y[i]).collect();
    let cohort = match CohortSample::new(y, inputs.pop.x.select_rows(&cohort_idx)) {
        Ok(c) => c,
        Err(e) => return failed(e.kind()),
    };
    let d: Vec<f64> = survey_idx.iter().map(|&i| 1.0 / inputs.pi_p[i]).collect();
    let survey = match SurveySample::new(inputs.pop.x.select_rows(&survey_idx), d, DesignInfo::poisson()) {
        Ok(s) => s,
        Err(e) => return failed(e.kind()),
    };
    let true_pi: Vec<f64> = cohort_idx.iter().map(|&i| inputs.pi_c[i]).collect();
    let results = match estimate_methods(&inputs.specs, &cohort, &survey, &inputs.solver, Some(&true_pi)) {
        Ok(r) => r,
        Err(e) => return failed(e.kind()),
    };
    let draws = results
        .into_iter()
        .map(|r| match r {
            Ok(e) => Ok(MethodDraw {
                mu_hat: e.mu_hat,
                var_hat: e.var_hat(),
                pi_above_one: e
                    .warnings
                    .iter()
                    .map(|w| match w {
                        EstimateWarning::PiAboveOne { count } | EstimateWarning::PiTruncated { count } => *count,
                        _ => 0,
                    })
                    .sum(),
                negative_component: e.warnings.contains(&EstimateWarning::NegativeComponent),
            }),
            Err(e) => Err(e.kind()),
        })
        .collect();
    ReplicateOutcome {
        n_cohort,
        n_survey,
        draws,
    }
}

fn summarize(method: Method, k: usize, outcomes: &[ReplicateOutcome], mu: f64) -> Result<MethodSummary> {
    let mut estimates = Vec::new();
    let mut variances = Vec::new();
    let mut hits = Vec::new();
    let mut failures = BTreeMap::new();
    let mut pi_above_one = 0;
    let mut negative_component = 0;
    for o in outcomes {
        match &o.draws[k] {
            Ok(d) => {
                estimates.push(d.mu_hat);
                if let Some(v) = d.var_hat {
                    variances.push(v);
                    hits.push((d.mu_hat - mu).abs() <= Z_95 * v.max(0.0).sqrt());
                }
                pi_above_one += d.pi_above_one;
                negative_component += usize::from(d.negative_component);
            }
            Err(kind) => *failures.entry(kind.to_string()).or_insert(0) += 1,
        }
    }
    let has_var = !variances.is_empty() && variances.len() == estimates.len();
    let metrics = if estimates.len() >= 2 {
        Some(compute_metrics(
            &estimates,
            has_var.then_some(variances.as_slice()),
            has_var.then_some(hits.as_slice()),
            mu,
        )?)
    } else {
        None
    };
    Ok(MethodSummary {
        method,
        metrics,
        n_failed: failures.values().sum(),
        failures,
        pi_above_one,
        negative_component,
    })
}

/// Generates the population from the configuration and runs every grid cell.
pub fn run_monte_carlo(config: &SimulationConfig) -> Result<SimulationReport> {
    config.validate()?;
    let pop = generate_population(&PopulationConfig {
        size: config.population_size,
        seed: config.seed,
        outcome_sd: config.outcome_sd,
    })?;
    run_monte_carlo_on(&pop, config)
}

/// Runs the study on a given population. Replicates run in parallel; results are reduced in
/// replicate order, so the report does not depend on scheduling.
pub fn run_monte_carlo_on(pop: &FinitePopulation, config: &SimulationConfig) -> Result<SimulationReport> {
    config.validate()?;
    let survey = calibrate_survey_const(pop, config.fp, config.weight_ratio, config.outcome_in_q)?;
    let eta = linear_predictor(pop, &config.slopes);
    let specs: Vec<MethodSpec<f64>> = config
        .methods
        .iter()
        .map(|&m| MethodSpec {
            truncate_pi_at_one: config.truncate_pi,
            ..MethodSpec::new(m)
        })
        .collect();

    let mut cells = Vec::new();
    let grid = config
        .scenarios
        .iter()
        .flat_map(|&s| config.fc_grid.iter().map(move |&f| (s, f)));
    for (cell, (scenario, f_c)) in grid.enumerate() {
        let intercept = calibrate_participation_intercept(pop, scenario, &config.slopes, f_c).map_err(|e| {
            Error::CellInfeasible {
                scenario: scenario.to_string(),
                f_c,
                source: Box::new(e),
            }
        })?;
        let pi_c = participation_rates(&eta, scenario, intercept);
        let max_participation = pi_c.iter().cloned().fold(0.0, f64::max);
        let inputs = CellInputs {
            pop,
            pi_c,
            pi_p: &survey.inclusion,
            specs: specs.clone(),
            solver: SolverConfig::default(),
        };
        let outcomes: Vec<ReplicateOutcome> = (0..config.replicates)
            .into_par_iter()
            .map(|b| run_replicate(&inputs, config.seed, cell, b))
            .collect();
        let b = outcomes.len() as f64;
        let methods = config
            .methods
            .iter()
            .enumerate()
            .map(|(k, &m)| summarize(m, k, &outcomes, pop.mu))
            .collect::<Result<Vec<_>>>()?;
        cells.push(CellReport {
            scenario,
            f_c,
            intercept,
            max_participation,
            mean_cohort_size: outcomes.iter().map(|o| o.n_cohort as f64).sum::<f64>() / b,
            mean_survey_size: outcomes.iter().map(|o| o.n_survey as f64).sum::<f64>() / b,
            methods,
        });
    }
    Ok(SimulationReport {
        population_size: pop.len(),
        seed: config.seed,
        replicates: config.replicates,
        population_mean: pop.mu,
        survey_const: survey.constant,
        survey_clipped: survey.clipped,
        cells,
    })
}

#[derive(Serialize)]
struct CsvRow {
    scenario: Scenario,
    f_c: f64,
    method: Method,
    pct_rb: Option<f64>,
    v: Option<f64>,
    vr: Option<f64>,
    mse: Option<f64>,
    cp: Option<f64>,
    replicates: usize,
    failed: usize,
    mean_n_c: f64,
    pi_above_one: usize,
    negative_component: usize,
}

/// One row per (scenario, f_c, method) with the Monte Carlo metrics.
pub fn write_report_csv<W: Write>(report: &SimulationReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for cell in &report.cells {
        for m in &cell.methods {
            let met = m.metrics.as_ref();
            w.serialize(CsvRow {
                scenario: cell.scenario,
                f_c: cell.f_c,
                method: m.method,
                pct_rb: met.map(|x| x.pct_rb),
                v: met.map(|x| x.v_emp),
                vr: met.and_then(|x| x.vr),
                mse: met.map(|x| x.mse),
                cp: met.and_then(|x| x.cp),
                replicates: met.map_or(0, |x| x.n),
                failed: m.n_failed,
                mean_n_c: cell.mean_cohort_size,
                pi_above_one: m.pi_above_one,
                negative_component: m.negative_component,
            })
            .map_err(|e| Error::Io(format!("report write failed: {e}")))?;
        }
    }
    w.flush().map_err(|e| Error::Io(format!("report write failed: {e}")))?;
    Ok(())
}
