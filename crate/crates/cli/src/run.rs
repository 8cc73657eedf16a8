//! Single training runs: `metrics.csv` plus `manifest.json` in the run's
//! output directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use qmarl::setup::{build_agent, ResolvedAgent};
use qmarl::TrainMetrics;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{ExperimentConfig, LoadedConfig, SeedSource};
use crate::CliError;

pub const METRICS_FILE: &str = "metrics.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const METRICS_HEADER: [&str; 5] = ["epoch", "total_reward", "actor_loss", "critic_loss", "wallclock_ms"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Unfinished,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub network: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub status: RunStatus,
    pub tool: String,
    pub version: String,
    pub started_at: String,
    pub finished_at: Option<String>,
    pub config: ExperimentConfig,
    pub defaults_applied: BTreeMap<String, Value>,
    pub seed_source: SeedSource,
    pub shape: ResolvedAgent,
    pub param_counts: Vec<ParamEntry>,
    pub param_total: usize,
    pub epochs_completed: usize,
    pub final_mean_reward: Option<f64>,
    pub error: Option<String>,
}

impl RunManifest {
    pub fn read(dir: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(dir.join(MANIFEST_FILE)).map_err(|e| CliError::io("reading manifest", e))?;
        serde_json::from_str(&text).map_err(|e| CliError::io("parsing manifest", e))
    }

    fn write(&self, dir: &Path) -> Result<(), CliError> {
        let tmp = dir.join(format!("{MANIFEST_FILE}.tmp"));
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&tmp, text + "\n").map_err(|e| CliError::io("writing manifest", e))?;
        fs::rename(&tmp, dir.join(MANIFEST_FILE)).map_err(|e| CliError::io("writing manifest", e))
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub metrics: Vec<TrainMetrics>,
    pub param_total: usize,
    pub action_dim: usize,
    pub dir: PathBuf,
}

/// Mean `total_reward` over the last `window` epochs (all of them if fewer).
pub fn trailing_mean(metrics: &[TrainMetrics], window: usize) -> Option<f64> {
    if metrics.is_empty() || window == 0 {
        return None;
    }
    let tail = &metrics[metrics.len().saturating_sub(window)..];
    Some(tail.iter().map(|m| m.total_reward).sum::<f64>() / tail.len() as f64)
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Trains one configured run into `config.output_dir`.
///
/// The manifest is written as `unfinished` before the first epoch and
/// rewritten as `finished` at the end; each metrics row is flushed as soon as
/// it exists, so a crashed run leaves a readable prefix. `observer` sees each
/// row after it is written and may abort the run by returning an error.
pub fn run_train<F>(loaded: &LoadedConfig, mut observer: F) -> Result<RunOutcome, CliError>
where
    F: FnMut(&TrainMetrics) -> qmarl::Result<()>,
{
    let c = &loaded.config;
    let env = c.env.build(c.seed).map_err(CliError::setup)?;
    let (n, obs_dim, action_dim) = (env.n_agents(), env.obs_dim(), env.action_dim());
    let shape = c.agent.resolve(n, obs_dim, action_dim).map_err(CliError::setup)?;
    let mut agent =
        build_agent(&c.agent, n, obs_dim, action_dim, c.train.learning_rate, c.seed).map_err(CliError::setup)?;
    let param_total = agent.param_count();

    let dir = c.output_dir.clone();
    fs::create_dir_all(&dir).map_err(|e| CliError::io("creating output directory", e))?;
    let mut manifest = RunManifest {
        status: RunStatus::Unfinished,
        tool: "qmarl".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        started_at: now(),
        finished_at: None,
        config: c.clone(),
        defaults_applied: loaded.defaults.clone(),
        seed_source: loaded.seed_source,
        shape,
        param_counts: agent
            .param_breakdown()
            .into_iter()
            .map(|(network, count)| ParamEntry { network, count })
            .collect(),
        param_total,
        epochs_completed: 0,
        final_mean_reward: None,
        error: None,
    };
    manifest.write(&dir)?;

    let mut csv = csv::Writer::from_path(dir.join(METRICS_FILE)).map_err(|e| CliError::io("creating metrics.csv", e))?;
    csv.write_record(METRICS_HEADER)
        .and_then(|_| csv.flush().map_err(Into::into))
        .map_err(|e| CliError::io("writing metrics.csv", e))?;

    let mut written = 0;
    let result = qmarl::marl::train(env.as_ref(), agent.as_mut(), &c.train, c.seed, |row| {
        let wallclock = if c.record_wallclock { row.wallclock_ms } else { 0 };
        csv.write_record([
            row.epoch.to_string(),
            row.total_reward.to_string(),
            row.actor_loss.to_string(),
            row.critic_loss.to_string(),
            wallclock.to_string(),
        ])
        .and_then(|_| csv.flush().map_err(Into::into))
        .map_err(|e| qmarl::Error::Data(format!("writing metrics.csv: {e}")))?;
        written += 1;
        observer(row)
    });

    manifest.epochs_completed = written;
    match result {
        Ok(metrics) => {
            manifest.status = RunStatus::Finished;
            manifest.finished_at = Some(now());
            manifest.final_mean_reward = trailing_mean(&metrics, 100);
            manifest.write(&dir)?;
            Ok(RunOutcome {
                metrics,
                param_total,
                action_dim,
                dir,
            })
        }
        Err(e) => {
            manifest.error = Some(e.to_string());
            manifest.write(&dir)?;
            Err(CliError::Runtime(e.to_string()))
        }
    }
}
