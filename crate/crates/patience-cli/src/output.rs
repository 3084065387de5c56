//! The JSON result document emitted by `estimate` and `staffing`.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Schema version of [`RunResult`].
pub const SCHEMA_VERSION: u32 = 1;

/// Rates in both display conventions; internal computation is per minute.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RateValue {
    pub per_hour: f64,
    pub per_minute: f64,
}

impl RateValue {
    /// From a per-minute rate.
    pub fn from_per_minute(rate: f64) -> Self {
        RateValue { per_hour: rate * 60.0, per_minute: rate }
    }
}

/// Estimated parameters with unit annotations.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Parameters {
    /// Patience (abandonment) rate θ̂.
    pub theta: RateValue,
    /// Virtual-wait rate γ̂.
    pub gamma: RateValue,
    /// Signaling probability q̂ (absent for estimators that do not model it).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    /// Covariate-model intercept (log minutes of mean patience at X = 0).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta0: Option<f64>,
    /// Covariate-model coefficients, aligned with `covariate_names`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
    /// Patience multipliers e^(β_j), aligned with `beta`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multipliers: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub covariate_names: Option<Vec<String>>,
}

/// One bootstrap percentile interval.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Interval {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

/// Bootstrap summary attached when `--bootstrap` is requested.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct BootstrapBlock {
    pub resamples_requested: usize,
    pub resamples_succeeded: usize,
    pub unreliable: bool,
    /// 95% percentile intervals, named per parameter; rate intervals are in
    /// the unit stated in the name.
    pub intervals: Vec<Interval>,
}

/// The versioned result document.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RunResult {
    pub schema_version: u32,
    pub tool_version: String,
    /// Echo of the invoking command line.
    pub command: String,
    /// Stable estimator identifier.
    pub estimator: String,
    pub seed: u64,
    /// SHA-256 of the raw input file bytes.
    pub input_digest_sha256: String,
    /// Primary display unit for rates ("hr" or "min"); both are always
    /// serialized inside each rate value.
    pub display_unit: String,
    pub converged: bool,
    pub degenerate: bool,
    pub iterations: usize,
    pub parameters: Parameters,
    /// Implied mean patience 1/θ̂ in minutes (null when θ̂ = 0).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_patience_minutes: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<BootstrapBlock>,
}

impl RunResult {
    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self).context("serializing result")?;
        text.push('\n');
        Ok(text)
    }
}

/// SHA-256 hex digest of a file's raw bytes.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

/// The reconstructable command echo: program name plus arguments.
pub fn command_echo() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}
