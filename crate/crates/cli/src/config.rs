//! Run configuration: a JSON file overlaid with command-line flags.

use std::path::{Path, PathBuf};

use anyonrng_core::bound::HierarchyLevel;
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Every parameter a command may read. Field names double as JSON keys and,
/// with dashes, as long flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Number of protocol rounds k.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    /// Bias α of the settings distribution; uniform when absent.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Use uniform settings in `expand` instead of the biased family.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uniform: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon_prime: Option<f64>,
    /// Depolarizing probability per qubit.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_p: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Hierarchy level: 1, 1+ab, 1+pairs or 2.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<HierarchyLevel>,
    /// Number of f-curve grid points on [2, 4].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    /// SDP stopping tolerance.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Solve one objective per symmetry orbit.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dedup: Option<bool>,
    /// Trial records CSV.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub records: Option<PathBuf>,
    /// f-curve table, JSON or `L,f` CSV.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fcurve: Option<PathBuf>,
    /// Hex-encoded extractor seed.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed_file: Option<PathBuf>,
    /// Extractor security s, with ε_ext = 2^-s.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub security_bits: Option<f64>,
    /// Violation threshold for the expansion curve.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_m: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_min: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_max: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_points: Option<usize>,
    /// Worker threads; falls back to ANYONRNG_THREADS.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Raw binary output for extracted bits.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub binary_out: Option<PathBuf>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

impl RunConfig {
    /// Values from `file` with every flag set on the command line on top.
    pub fn load(file: Option<&Path>, flags: &RunConfig) -> Result<Self, CliError> {
        let Some(path) = file else {
            return Ok(flags.clone());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        let mut merged = serde_json::to_value(base).expect("config serializes");
        let over = serde_json::to_value(flags).expect("config serializes");
        if let (Some(m), Some(o)) = (merged.as_object_mut(), over.as_object()) {
            for (k, v) in o {
                m.insert(k.clone(), v.clone());
            }
        }
        serde_json::from_value(merged).map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn require<T: Clone>(value: &Option<T>, flag: &str) -> Result<T, CliError> {
        value.clone().ok_or_else(|| CliError::Usage(format!("--{flag} is required")))
    }
}
