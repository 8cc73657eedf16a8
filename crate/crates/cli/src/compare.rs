//! `compare`: several configs on one environment, summarized in
//! `compare.csv` and an aligned text table.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use qmarl::{AgentKind, TrainMetrics};

use crate::config::LoadedConfig;
use crate::run::{run_train, trailing_mean};
use crate::CliError;

pub const COMPARE_FILE: &str = "compare.csv";
pub const COMPARE_HEADER: [&str; 5] = ["agent_kind", "param_count", "action_dim", "final_mean_reward", "epochs_to_90pct"];

/// Trailing window for the final reward.
pub const FINAL_WINDOW: usize = 100;
/// Trailing window for the convergence epoch.
pub const CONVERGENCE_WINDOW: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Finished {
        param_count: usize,
        final_mean_reward: f64,
        /// `None` when the trailing mean never reached the mark.
        epochs_to_90pct: Option<usize>,
    },
    Infeasible {
        budget: usize,
        minimum: usize,
    },
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub agent_kind: AgentKind,
    pub action_dim: usize,
    pub dir: PathBuf,
    pub outcome: Outcome,
}

impl CompareRow {
    fn fields(&self) -> [String; 5] {
        let (params, reward, epochs) = match &self.outcome {
            Outcome::Finished {
                param_count,
                final_mean_reward,
                epochs_to_90pct,
            } => (
                param_count.to_string(),
                final_mean_reward.to_string(),
                epochs_to_90pct.map_or("never".into(), |e| e.to_string()),
            ),
            Outcome::Infeasible { .. } => ("infeasible".into(), "infeasible".into(), "infeasible".into()),
            Outcome::Failed(_) => ("failed".into(), "failed".into(), "failed".into()),
        };
        [self.agent_kind.to_string(), params, self.action_dim.to_string(), reward, epochs]
    }
}

/// Number of epochs until the trailing `CONVERGENCE_WINDOW`-epoch mean first
/// reaches 90% of the final trailing `FINAL_WINDOW`-epoch mean.
pub fn epochs_to_90pct(metrics: &[TrainMetrics]) -> Option<usize> {
    let target = 0.9 * trailing_mean(metrics, FINAL_WINDOW)?;
    let mut sum = 0.0;
    for (i, m) in metrics.iter().enumerate() {
        sum += m.total_reward;
        if i >= CONVERGENCE_WINDOW {
            sum -= metrics[i - CONVERGENCE_WINDOW].total_reward;
        }
        let len = (i + 1).min(CONVERGENCE_WINDOW);
        if sum / len as f64 >= target {
            return Some(i + 1);
        }
    }
    None
}

/// Runs every config, each into `out/<index>-<kind>`, continuing past
/// failures. Configs must share one environment description.
pub fn run_compare(configs: &[LoadedConfig], out: &Path) -> Result<Vec<CompareRow>, CliError> {
    if configs.len() < 2 {
        return Err(CliError::Config(format!("compare needs at least 2 configs, got {}", configs.len())));
    }
    let env = &configs[0].config.env;
    if let Some(i) = configs.iter().position(|c| &c.config.env != env) {
        return Err(CliError::Config(format!("config {} uses a different `env` than config 0", i)));
    }
    let action_dim = env.build(configs[0].config.seed).map_err(CliError::setup)?.action_dim();
    std::fs::create_dir_all(out).map_err(|e| CliError::io("creating output directory", e))?;

    let mut rows = Vec::with_capacity(configs.len());
    for (i, loaded) in configs.iter().enumerate() {
        let kind = loaded.config.agent.kind;
        let mut run = loaded.clone();
        run.config.output_dir = out.join(format!("{i}-{kind}"));
        let outcome = match run_train(&run, |_| Ok(())) {
            Ok(r) => Outcome::Finished {
                param_count: r.param_total,
                final_mean_reward: trailing_mean(&r.metrics, FINAL_WINDOW).unwrap_or(f64::NAN),
                epochs_to_90pct: epochs_to_90pct(&r.metrics),
            },
            Err(CliError::Infeasible { budget, minimum }) => Outcome::Infeasible { budget, minimum },
            Err(e) => Outcome::Failed(e.to_string()),
        };
        rows.push(CompareRow {
            agent_kind: kind,
            action_dim,
            dir: run.config.output_dir,
            outcome,
        });
    }

    let mut csv = csv::Writer::from_path(out.join(COMPARE_FILE)).map_err(|e| CliError::io("creating compare.csv", e))?;
    csv.write_record(COMPARE_HEADER)
        .map_err(|e| CliError::io("writing compare.csv", e))?;
    for row in &rows {
        csv.write_record(row.fields()).map_err(|e| CliError::io("writing compare.csv", e))?;
    }
    csv.flush().map_err(|e| CliError::io("writing compare.csv", e))?;
    Ok(rows)
}

/// The rows as a column-aligned table, header first.
pub fn format_table(rows: &[CompareRow]) -> String {
    let body: Vec<[String; 5]> = rows.iter().map(CompareRow::fields).collect();
    let mut widths = COMPARE_HEADER.map(str::len);
    for r in &body {
        for (w, f) in widths.iter_mut().zip(r) {
            *w = (*w).max(f.len());
        }
    }
    let mut out = String::new();
    let header = COMPARE_HEADER.map(String::from);
    for r in std::iter::once(&header).chain(&body) {
        let line: Vec<String> = r.iter().zip(widths).map(|(f, w)| format!("{f:<w$}")).collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}
