//! TOML run configuration: column schema, optional input paths, and the
//! simulation scenario grid.

use std::path::{Path, PathBuf};

use curecal::{CsvSchema, ScenarioSpec, DEFAULT_SURVIVAL_TIMES};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub time_col: Option<String>,
    pub event_col: Option<String>,
    pub covariate_cols: Option<Vec<String>>,
    pub historical: Option<PathBuf>,
    pub trial: Option<PathBuf>,
    #[serde(default)]
    pub scenario: Vec<ScenarioEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    #[default]
    Cure,
    Survival,
}

/// One `[[scenario]]` block. Replicates and seed fall back to the
/// command-line defaults; everything else mirrors `ScenarioSpec`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioEntry {
    #[serde(default)]
    pub kind: ScenarioKind,
    pub n: usize,
    pub p: usize,
    pub a: f64,
    pub g: f64,
    pub b: f64,
    pub shape: f64,
    pub censor_log_scale: Option<f64>,
    pub truth_n: Option<usize>,
    pub trial_n: Option<usize>,
    pub replicates: Option<usize>,
    pub seed: Option<u64>,
    /// Survival scenarios only: evaluation grid.
    pub times: Option<Vec<f64>>,
}

impl ScenarioEntry {
    /// Scenario `index` in the grid gets `base_seed + index` unless it pins
    /// its own seed.
    pub fn to_spec(&self, default_replicates: usize, base_seed: u64, index: usize) -> ScenarioSpec {
        ScenarioSpec {
            n: self.n,
            p: self.p,
            a: self.a,
            g: self.g,
            b: self.b,
            shape: self.shape,
            censor_log_scale: self.censor_log_scale.unwrap_or(5.5),
            truth_n: self.truth_n.unwrap_or(100_000),
            trial_n: self.trial_n.unwrap_or(300),
            replicates: self.replicates.unwrap_or(default_replicates),
            seed: self.seed.unwrap_or(base_seed.wrapping_add(index as u64)),
        }
    }

    pub fn times(&self) -> Vec<f64> {
        self.times.clone().unwrap_or_else(|| DEFAULT_SURVIVAL_TIMES.to_vec())
    }
}

pub fn load_config(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let raw = std::fs::read_to_string(path).map_err(|source| {
        CliError::Lib(curecal::Error::Io { path: path.display().to_string(), source })
    })?;
    toml::from_str(&raw)
        .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
}

/// Column names from the config, or sniffed from the CSV header: `time` and
/// `event` by default, every other column a covariate.
pub fn resolve_schema(config: &FileConfig, sample: &Path) -> Result<CsvSchema, CliError> {
    let time_col = config.time_col.clone().unwrap_or_else(|| "time".to_string());
    let event_col = config.event_col.clone().unwrap_or_else(|| "event".to_string());
    let covariate_cols = match &config.covariate_cols {
        Some(cols) => cols.clone(),
        None => {
            let mut reader = csv::Reader::from_path(sample).map_err(|e| {
                CliError::Usage(format!("cannot read {}: {e}", sample.display()))
            })?;
            let headers = reader
                .headers()
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", sample.display())))?;
            headers
                .iter()
                .filter(|h| *h != time_col && *h != event_col)
                .map(|h| h.to_string())
                .collect()
        }
    };
    Ok(CsvSchema { time_col, event_col, covariate_cols })
}
