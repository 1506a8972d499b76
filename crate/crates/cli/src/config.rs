//! JSON experiment configuration. One file can hold the sections for every
//! subcommand; absent sections fall back to the built-in defaults
//! (theta = 3, alpha = 3, mu_epsilon = 0.05, 200 expected points per disk).

use std::path::PathBuf;

use ehm_core::ArrivalModel;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    /// Free-form experiment id, echoed into the CSV metadata.
    #[serde(default)]
    pub experiment: Option<String>,
    /// Master seed; mandatory (there is no wall-clock fallback) unless
    /// `--seed` is passed on the command line.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub calibrate_mu: Option<CalibrateMuSection>,
    #[serde(default)]
    pub sweep_energy: Option<SweepEnergySection>,
    #[serde(default)]
    pub txprob: Option<TxprobSection>,
    #[serde(default)]
    pub tail_bound: Option<TailBoundSection>,
}

impl ConfigFile {
    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Invalid(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Invalid(format!("config {}: {e}", path.display())))
    }

    pub fn resolve_seed(&self, flag: Option<u64>) -> Result<u64, CliError> {
        flag.or(self.seed).ok_or_else(|| {
            CliError::Invalid(
                "no seed given: set \"seed\" in the config or pass --seed".into(),
            )
        })
    }
}

fn require_grid(name: &str, grid: &[f64]) -> Result<(), CliError> {
    if grid.is_empty() {
        return Err(CliError::Invalid(format!("{name} must not be empty")));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(CliError::Invalid(format!(
            "{name} must be strictly increasing"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateMuSection {
    pub alpha: f64,
    pub eps_targets: Vec<f64>,
    pub trials: u64,
    pub mean_count: f64,
    /// Explicit density grid for the sweep; derived from the targets when
    /// omitted.
    pub mu_grid: Option<Vec<f64>>,
    pub output: PathBuf,
}

impl Default for CalibrateMuSection {
    fn default() -> Self {
        Self {
            alpha: 3.0,
            eps_targets: vec![
                0.005, 0.0075, 0.01, 0.015, 0.02, 0.03, 0.05, 0.075, 0.1, 0.15, 0.2,
            ],
            trials: 100_000,
            mean_count: 200.0,
            mu_grid: None,
            output: PathBuf::from("mu_table.csv"),
        }
    }
}

impl CalibrateMuSection {
    pub fn validate(&self) -> Result<(), CliError> {
        require_grid("eps_targets", &self.eps_targets)?;
        if let Some(grid) = &self.mu_grid {
            require_grid("mu_grid", grid)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// Optimal power and throughput from the infinite-battery rule.
    Analytic,
    /// Simulated transmission probability under a finite battery, with the
    /// power optimized by grid search under the admissibility constraint.
    FiniteSim,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepEnergySection {
    pub mode: SweepMode,
    pub lambda_e_grid: Vec<f64>,
    pub lambda_0_list: Vec<f64>,
    pub theta: f64,
    pub alpha: f64,
    /// Literal nominal density; ignored when `mu_table` is given.
    pub mu_epsilon: Option<f64>,
    /// Calibration table produced by `ehm calibrate-mu`; resolved at
    /// `epsilon`.
    pub mu_table: Option<PathBuf>,
    pub epsilon: f64,
    /// Battery capacity as a multiple of the power (finite_sim mode).
    pub b_over_p: f64,
    pub dof: u32,
    pub horizon: u64,
    pub replications: u32,
    /// Power-grid resolution for the finite_sim search.
    pub power_grid_per_decade: u32,
    pub output: PathBuf,
}

impl Default for SweepEnergySection {
    fn default() -> Self {
        Self {
            mode: SweepMode::Analytic,
            lambda_e_grid: (0..=15)
                .map(|i| 10f64.powf(-1.0 + 3.0 * i as f64 / 15.0))
                .collect(),
            lambda_0_list: vec![0.02, 0.05, 0.5],
            theta: 3.0,
            alpha: 3.0,
            mu_epsilon: Some(0.05),
            mu_table: None,
            epsilon: 0.015,
            b_over_p: 1.5,
            dof: 4,
            horizon: 200_000,
            replications: 1,
            power_grid_per_decade: 50,
            output: PathBuf::from("sweep_energy.csv"),
        }
    }
}

impl SweepEnergySection {
    pub fn validate(&self) -> Result<(), CliError> {
        require_grid("lambda_e_grid", &self.lambda_e_grid)?;
        require_grid("lambda_0_list", &self.lambda_0_list)?;
        if !(self.b_over_p >= 1.0) {
            return Err(CliError::Invalid(
                "b_over_p must be at least 1 (the battery must hold one transmission)".into(),
            ));
        }
        if self.power_grid_per_decade == 0 {
            return Err(CliError::Invalid(
                "power_grid_per_decade must be positive".into(),
            ));
        }
        if self.replications == 0 {
            return Err(CliError::Invalid("replications must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxprobMode {
    /// Sweep the capacity multiple at fixed randomness (one curve per
    /// entry of `b_over_p_list`).
    Capacity,
    /// Sweep the arrival randomness at fixed capacity multiple (one curve
    /// per entry of `dof_list`).
    Dof,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TxprobSection {
    pub mode: TxprobMode,
    pub power_grid: Vec<f64>,
    pub lambda_e: f64,
    pub dof: u32,
    pub b_over_p_list: Vec<f64>,
    pub dof_list: Vec<u32>,
    pub b_over_p: f64,
    pub horizon: u64,
    pub replications: u32,
    pub output: PathBuf,
}

impl Default for TxprobSection {
    fn default() -> Self {
        Self {
            mode: TxprobMode::Capacity,
            power_grid: vec![
                1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 12.0, 16.0, 20.0, 24.0, 32.0,
            ],
            lambda_e: 2.0,
            dof: 4,
            b_over_p_list: vec![1.5, 2.0, 4.0, 10.0],
            dof_list: vec![2, 4, 8, 16],
            b_over_p: 1.5,
            horizon: 200_000,
            replications: 1,
            output: PathBuf::from("txprob.csv"),
        }
    }
}

impl TxprobSection {
    pub fn validate(&self) -> Result<(), CliError> {
        require_grid("power_grid", &self.power_grid)?;
        if !(self.power_grid[0] > 0.0) {
            return Err(CliError::Invalid("power_grid must be positive".into()));
        }
        require_grid("b_over_p_list", &self.b_over_p_list)?;
        if self.b_over_p_list[0] < 1.0 || self.b_over_p < 1.0 {
            return Err(CliError::Invalid("capacity multiples must be at least 1".into()));
        }
        if self.dof_list.is_empty() || self.dof_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Invalid(
                "dof_list must be non-empty and strictly increasing".into(),
            ));
        }
        if self.replications == 0 {
            return Err(CliError::Invalid("replications must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TailBoundSection {
    pub x_grid: Vec<f64>,
    /// Chi-squared arrival parameters, used unless `arrivals` is given.
    pub dof: u32,
    pub lambda_e: f64,
    /// Full arrival-model spec, overriding `dof`/`lambda_e`. Tagged form,
    /// e.g. `{"type": "exponential", "rate": 2.0}`.
    pub arrivals: Option<ArrivalModel>,
    pub power: f64,
    pub horizon: u64,
    pub replications: u32,
    pub output: PathBuf,
}

impl Default for TailBoundSection {
    fn default() -> Self {
        Self {
            x_grid: (0..=15).map(|i| 2.0 * i as f64).collect(),
            dof: 4,
            lambda_e: 2.0,
            arrivals: None,
            power: 4.0,
            horizon: 1_000_000,
            replications: 1,
            output: PathBuf::from("tail_bound.csv"),
        }
    }
}

impl TailBoundSection {
    pub fn model(&self) -> ArrivalModel {
        self.arrivals.clone().unwrap_or(ArrivalModel::ScaledChiSquared {
            dof: self.dof,
            rate: self.lambda_e,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        require_grid("x_grid", &self.x_grid)?;
        let model = self.model();
        model
            .validate()
            .map_err(|e| CliError::Invalid(format!("arrivals: {e}")))?;
        if !(model.rate() < self.power) {
            return Err(CliError::Invalid(
                "tail bound requires the arrival rate below the power".into(),
            ));
        }
        if self.replications == 0 {
            return Err(CliError::Invalid("replications must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        CalibrateMuSection::default().validate().unwrap();
        SweepEnergySection::default().validate().unwrap();
        TxprobSection::default().validate().unwrap();
        TailBoundSection::default().validate().unwrap();
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = serde_json::from_str::<ConfigFile>(r#"{"seed": 1, "typo_field": 2}"#);
        assert!(err.is_err());
        let err = serde_json::from_str::<ConfigFile>(
            r#"{"seed": 1, "txprob": {"powre_grid": [1.0]}}"#,
        );
        assert!(err.is_err());
    }

    #[test]
    fn unsorted_grid_is_invalid() {
        let cfg: ConfigFile = serde_json::from_str(
            r#"{"seed": 1, "txprob": {"power_grid": [4.0, 2.0]}}"#,
        )
        .unwrap();
        assert!(cfg.txprob.unwrap().validate().is_err());
    }

    #[test]
    fn seed_is_mandatory() {
        let cfg: ConfigFile = serde_json::from_str(r#"{}"#).unwrap();
        assert!(cfg.resolve_seed(None).is_err());
        assert_eq!(cfg.resolve_seed(Some(7)).unwrap(), 7);
        let cfg: ConfigFile = serde_json::from_str(r#"{"seed": 3}"#).unwrap();
        assert_eq!(cfg.resolve_seed(None).unwrap(), 3);
        assert_eq!(cfg.resolve_seed(Some(9)).unwrap(), 9);
    }
}
