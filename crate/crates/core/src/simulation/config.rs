use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::Method;

use super::calibrate::{Scenario, PAPER_SLOPES};

/// Monte Carlo study settings, read from TOML. Every field has a desk-scale default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub population_size: usize,
    pub seed: u64,
    pub replicates: usize,
    pub scenarios: Vec<Scenario>,
    /// Target mean participation rates.
    pub fc_grid: Vec<f64>,
    /// Survey sampling fraction.
    pub fp: f64,
    /// Target `max q / min q` of the survey size measure.
    pub weight_ratio: f64,
    pub outcome_in_q: f64,
    pub slopes: [f64; 4],
    pub outcome_sd: f64,
    pub methods: Vec<Method>,
    pub truncate_pi: bool,
    pub output: Option<PathBuf>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            population_size: 50_000,
            seed: 20_240_501,
            replicates: 1000,
            scenarios: vec![Scenario::LogLink, Scenario::LogitLink],
            fc_grid: vec![0.005, 0.05, 0.1, 0.2],
            fp: 0.025,
            weight_ratio: 20.0,
            outcome_in_q: 0.03,
            slopes: PAPER_SLOPES,
            outcome_sd: 1.0,
            methods: Method::ALL.to_vec(),
            truncate_pi: false,
            output: None,
        }
    }
}

impl SimulationConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates < 2 {
            return Err(Error::InsufficientReplicates {
                needed: 2,
                got: self.replicates,
            });
        }
        if self.scenarios.is_empty() || self.fc_grid.is_empty() || self.methods.is_empty() {
            return Err(Error::Config("scenarios, fc_grid and methods must be non-empty".into()));
        }
        if let Some(f) = self.fc_grid.iter().find(|f| !(**f > 0.0 && **f < 1.0)) {
            return Err(Error::Config(format!("f_c values must lie in (0, 1), got {f}")));
        }
        if !(self.fp > 0.0 && self.fp <= 1.0) {
            return Err(Error::Config(format!("fp must lie in (0, 1], got {}", self.fp)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_partial_file() {
        let cfg = SimulationConfig::from_toml_str(
            r#"
            population_size = 20000
            replicates = 10
            scenarios = ["log_link"]
            fc_grid = [0.1]
            methods = ["ALP", "ALP.S", "CLW"]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.population_size, 20_000);
        assert_eq!(cfg.methods, vec![Method::ALP, Method::ALPS, Method::CLW]);
        assert_eq!(cfg.fp, 0.025);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(SimulationConfig::from_toml_str("populaton_size = 5").is_err());
        assert!(SimulationConfig::from_toml_str("fc_grid = [1.5]").is_err());
        assert!(matches!(
            SimulationConfig::from_toml_str("replicates = 1"),
            Err(Error::InsufficientReplicates { .. })
        ));
    }

    #[test]
    fn default_round_trips() {
        let s = toml::to_string(&SimulationConfig::default()).unwrap();
        assert_eq!(
            SimulationConfig::from_toml_str(&s).unwrap(),
            SimulationConfig::default()
        );
    }
}
