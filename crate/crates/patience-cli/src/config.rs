//! Default-value resolution: built-in defaults, optionally overridden by a
//! TOML file named by the `PATIENCE_CONFIG` environment variable, in turn
//! overridden by explicit command-line flags.

use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::Deserialize;

/// Environment variable naming the defaults file.
pub const CONFIG_ENV_VAR: &str = "PATIENCE_CONFIG";

/// Optional defaults loadable from the config file. Every field maps to the
/// command-line flag of the same name.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FileDefaults {
    pub epsilon: Option<f64>,
    pub max_iter: Option<usize>,
    pub seed: Option<u64>,
    pub unit: Option<String>,
    pub bootstrap: Option<usize>,
    pub threshold: Option<f64>,
    pub jobs: Option<usize>,
}

/// Fully resolved defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct Defaults {
    pub epsilon: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub unit: String,
    pub bootstrap: usize,
    pub threshold: f64,
    pub jobs: Option<usize>,
}

impl Default for Defaults {
    fn default() -> Self {
        Defaults {
            epsilon: 1e-6,
            max_iter: 10_000,
            seed: 0,
            unit: String::from("hr"),
            bootstrap: 500,
            threshold: 0.47,
            jobs: None,
        }
    }
}

impl Defaults {
    fn apply(mut self, file: FileDefaults) -> Self {
        if let Some(v) = file.epsilon {
            self.epsilon = v;
        }
        if let Some(v) = file.max_iter {
            self.max_iter = v;
        }
        if let Some(v) = file.seed {
            self.seed = v;
        }
        if let Some(v) = file.unit {
            self.unit = v;
        }
        if let Some(v) = file.bootstrap {
            self.bootstrap = v;
        }
        if let Some(v) = file.threshold {
            self.threshold = v;
        }
        if file.jobs.is_some() {
            self.jobs = file.jobs;
        }
        self
    }
}

/// Load defaults, honoring `PATIENCE_CONFIG` when set.
pub fn load_defaults() -> Result<Defaults> {
    let base = Defaults::default();
    match std::env::var_os(CONFIG_ENV_VAR) {
        None => Ok(base),
        Some(path) => {
            let path = PathBuf::from(path);
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("cannot read config file {}", path.display()))?;
            let file: FileDefaults = toml::from_str(&text)
                .with_context(|| format!("invalid config file {}", path.display()))?;
            Ok(base.apply(file))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_override_builtins() {
        let file: FileDefaults =
            toml::from_str("epsilon = 1e-8\nunit = \"min\"\njobs = 3").unwrap();
        let d = Defaults::default().apply(file);
        assert_eq!(d.epsilon, 1e-8);
        assert_eq!(d.unit, "min");
        assert_eq!(d.jobs, Some(3));
        assert_eq!(d.max_iter, 10_000);
        assert_eq!(d.threshold, 0.47);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<FileDefaults>("epsilonn = 1.0").is_err());
    }
}
