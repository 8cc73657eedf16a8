//! Experiment config files (TOML).
//!
//! ```toml
//! seed = 7
//!
//! [env]
//! kind = "bandit"
//! k = 1
//!
//! [agent]
//! kind = "quantum"
//! ```
//!
//! Every section and key other than `env.kind` is optional. Keys the file
//! leaves out are filled from defaults and listed in the run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use qmarl::setup::{AgentSpec, EnvSpec};
use qmarl::TrainSpec;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

/// Environment variable that replaces the config file's seed.
pub const SEED_VAR: &str = "QMARL_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    #[serde(default)]
    pub agent: AgentSpec,
    #[serde(default)]
    pub train: TrainSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Write measured times to the `wallclock_ms` column. Off by default, in
    /// which case the column is 0 and reruns produce identical files.
    #[serde(default)]
    pub record_wallclock: bool,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs/latest")
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let cfg = CliError::config;
        self.env.validate().map_err(cfg)?;
        self.agent.validate().map_err(cfg)?;
        self.train.validate().map_err(cfg)?;
        if self.output_dir.as_os_str().is_empty() {
            return Err(CliError::Config("`output_dir` must not be empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSource {
    Config,
    Default,
    Environment,
}

/// A validated config plus what the parser filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    /// Dotted key path to applied default value.
    pub defaults: BTreeMap<String, Value>,
    pub seed_source: SeedSource,
}

impl LoadedConfig {
    /// Applies a `QMARL_SEED` value, if any.
    pub fn override_seed(&mut self, value: Option<&str>) -> Result<(), CliError> {
        let Some(raw) = value else { return Ok(()) };
        let seed = raw
            .trim()
            .parse::<u64>()
            .map_err(|e| CliError::Config(format!("`{SEED_VAR}` = {raw:?} is not a 64-bit seed: {e}")))?;
        self.config.seed = seed;
        self.defaults.remove("seed");
        self.seed_source = SeedSource::Environment;
        Ok(())
    }
}

/// Reads, parses and validates a config file.
pub fn parse_config(path: &Path) -> Result<LoadedConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_config_str(text: &str) -> Result<LoadedConfig, CliError> {
    let raw: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(format!("syntax error: {e}")))?;
    let config: ExperimentConfig =
        serde_path_to_error::deserialize(toml::Value::Table(raw.clone())).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "." {
                CliError::Config(inner.message().to_string())
            } else {
                CliError::Config(format!("`{path}`: {}", inner.message()))
            }
        })?;
    config.validate()?;

    let given = serde_json::to_value(&raw).expect("toml tables convert to json");
    let full = serde_json::to_value(&config).expect("config serializes");
    let mut defaults = BTreeMap::new();
    collect_defaults("", &full, Some(&given), &mut defaults);
    let seed_source = if raw.contains_key("seed") {
        SeedSource::Config
    } else {
        SeedSource::Default
    };
    Ok(LoadedConfig {
        config,
        defaults,
        seed_source,
    })
}

/// Leaves of `full` with no counterpart in `given`.
fn collect_defaults(prefix: &str, full: &Value, given: Option<&Value>, out: &mut BTreeMap<String, Value>) {
    let Value::Object(fields) = full else { return };
    for (key, value) in fields {
        let path = if prefix.is_empty() {
            key.clone()
        } else {
            format!("{prefix}.{key}")
        };
        let sub = given.and_then(|g| g.get(key));
        match (value, sub) {
            (Value::Object(_), _) => collect_defaults(&path, value, sub, out),
            (_, None) => {
                out.insert(path, value.clone());
            }
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_bandit_config() {
        let loaded = parse_config_str("seed = 7\n[env]\nkind = \"bandit\"\nk = 1\n[agent]\nkind = \"quantum\"\n").unwrap();
        let c = &loaded.config;
        assert_eq!(c.seed, 7);
        assert_eq!(c.train, TrainSpec::default());
        assert_eq!(loaded.seed_source, SeedSource::Config);
        assert_eq!(loaded.defaults["train.epochs"], Value::from(1000));
        assert_eq!(loaded.defaults["agent.actor_layers"], Value::from(3));
        assert!(!loaded.defaults.contains_key("env.k"));
        assert!(!loaded.defaults.contains_key("seed"));
    }

    #[test]
    fn seed_override() {
        let mut loaded = parse_config_str("[env]\nkind = \"factory\"\n").unwrap();
        assert_eq!(loaded.seed_source, SeedSource::Default);
        assert!(loaded.defaults.contains_key("seed"));
        loaded.override_seed(Some("42")).unwrap();
        assert_eq!(loaded.config.seed, 42);
        assert_eq!(loaded.seed_source, SeedSource::Environment);
        assert!(!loaded.defaults.contains_key("seed"));
        assert!(loaded.override_seed(Some("x")).is_err());
    }
}
