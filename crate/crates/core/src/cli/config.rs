use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::harness::Aggregation;
use crate::models::BenchmarkKind;
use crate::optimize::OptimizerConfig;

use super::CliError;

/// One JSON file drives every subcommand; each reads the fields it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Model for `simulate` and `fit`.
    pub benchmark: Option<BenchmarkKind>,
    /// Sample size for `simulate`.
    pub n: Option<usize>,
    pub snr_divisor: f64,
    /// Overrides `snr_divisor` with noise-free data.
    pub noiseless: bool,
    pub seed: u64,
    /// Coefficient of variation of the NLS linear starting point in `fit`.
    pub prior_cv: f64,
    pub optimizer: OptimizerConfig,
    pub benchmark_grid: BenchmarkGrid,
    /// Written by `benchmark` into `manifest.json`; ignored on input.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<serde_json::Value>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            benchmark: None,
            n: None,
            snr_divisor: 10.0,
            noiseless: false,
            seed: 0,
            prior_cv: 0.0,
            optimizer: OptimizerConfig::default(),
            benchmark_grid: BenchmarkGrid::default(),
            manifest: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkGrid {
    pub models: Vec<BenchmarkKind>,
    /// Per-model defaults when absent.
    pub sample_sizes: Option<Vec<usize>>,
    pub snr_levels: Vec<f64>,
    /// Per-model high/medium/low levels when absent.
    pub priors: Option<Vec<f64>>,
    pub mc_reps: usize,
    pub exclude_nonconverged: bool,
    pub aggregation: Aggregation,
}

impl Default for BenchmarkGrid {
    fn default() -> Self {
        Self {
            models: BenchmarkKind::ALL.to_vec(),
            sample_sizes: None,
            snr_levels: vec![10.0, 5.0],
            priors: None,
            mc_reps: 500,
            exclude_nonconverged: true,
            aggregation: Aggregation::BlockSum,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: Config = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !self.noiseless && !(self.snr_divisor > 0.0 && self.snr_divisor.is_finite()) {
            return Err(CliError::Usage(format!("snr_divisor must be positive, got {}", self.snr_divisor)));
        }
        if !(self.prior_cv >= 0.0 && self.prior_cv.is_finite()) {
            return Err(CliError::Usage(format!("prior_cv must be nonnegative, got {}", self.prior_cv)));
        }
        self.optimizer.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        let g = &self.benchmark_grid;
        if g.mc_reps == 0 {
            return Err(CliError::Usage("benchmark_grid.mc_reps must be at least 1".into()));
        }
        if g.models.is_empty() || g.snr_levels.is_empty() {
            return Err(CliError::Usage("benchmark_grid needs at least one model and noise level".into()));
        }
        if g.snr_levels.iter().any(|s| !(*s > 0.0)) {
            return Err(CliError::Usage("benchmark_grid.snr_levels must be positive".into()));
        }
        if let Some(p) = &g.priors {
            if p.is_empty() || p.iter().any(|v| !(*v >= 0.0)) {
                return Err(CliError::Usage("benchmark_grid.priors must be nonnegative".into()));
            }
        }
        if let Some(n) = &g.sample_sizes {
            if n.is_empty() {
                return Err(CliError::Usage("benchmark_grid.sample_sizes is empty".into()));
            }
        }
        Ok(())
    }

    pub fn snr(&self) -> Option<f64> {
        (!self.noiseless).then_some(self.snr_divisor)
    }

    pub fn require_benchmark(&self) -> Result<BenchmarkKind, CliError> {
        self.benchmark
            .ok_or_else(|| CliError::Usage("config must name a benchmark".into()))
    }
}
