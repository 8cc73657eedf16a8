use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qmarl::ShiftRule;
use qmarl_cli::compare::{format_table, run_compare, Outcome};
use qmarl_cli::config::SEED_VAR;
use qmarl_cli::gradcheck::{run_gradcheck, GradcheckOptions, TOLERANCE};
use qmarl_cli::{parse_config, run_train, CliError, LoadedConfig, EXIT_CHECK_FAILED, EXIT_OK, EXIT_RUNTIME};

#[derive(Parser)]
#[command(name = "qmarl", version, about = "Quantum multi-agent actor-critic experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration; writes metrics.csv and manifest.json.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Check parameter-shift gradients against finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Replace the shift angle (negative control).
        #[arg(long, hide = true)]
        shift: Option<f64>,
    },
    /// Train several configurations on one environment and tabulate them.
    Compare {
        #[arg(long, num_args = 1.., required = true)]
        configs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(path: &PathBuf) -> Result<LoadedConfig, CliError> {
    let mut loaded = parse_config(path)?;
    loaded.override_seed(std::env::var(SEED_VAR).ok().as_deref())?;
    Ok(loaded)
}

fn train(config: PathBuf) -> Result<i32, CliError> {
    let loaded = load(&config)?;
    let epochs = loaded.config.train.epochs;
    let every = (epochs / 10).max(1);
    let outcome = run_train(&loaded, |row| {
        if (row.epoch + 1) % every == 0 {
            eprintln!("epoch {:>5}  reward {:.4}", row.epoch + 1, row.total_reward);
        }
        Ok(())
    })?;
    println!(
        "{} epochs, {} parameters, output in {}",
        outcome.metrics.len(),
        outcome.param_total,
        outcome.dir.display()
    );
    Ok(EXIT_OK)
}

fn gradcheck(trials: usize, seed: u64, shift: Option<f64>) -> Result<i32, CliError> {
    if trials == 0 {
        return Err(CliError::Config("`--trials` must be at least 1".into()));
    }
    let mut opts = GradcheckOptions::new(trials, seed);
    if let Some(s) = shift {
        opts.rule = ShiftRule { shift: s, ..opts.rule };
    }
    let report = run_gradcheck(&opts).map_err(|e| CliError::Runtime(e.to_string()))?;
    for t in &report.trials {
        println!(
            "trial {:>4}  qubits {}  layers {}  max deviation {:.3e}",
            t.trial, t.n_qubits, t.n_layers, t.max_deviation
        );
    }
    println!("max deviation {:.3e} (tolerance {TOLERANCE:.0e})", report.max_deviation);
    if report.passed() {
        return Ok(EXIT_OK);
    }
    let worst = report.worst().expect("at least one trial");
    println!(
        "failing instance: {}",
        serde_json::to_string(worst).expect("instance serializes")
    );
    Ok(EXIT_CHECK_FAILED)
}

fn compare(configs: Vec<PathBuf>, out: PathBuf) -> Result<i32, CliError> {
    let loaded = configs.iter().map(load).collect::<Result<Vec<_>, _>>()?;
    let rows = run_compare(&loaded, &out)?;
    print!("{}", format_table(&rows));
    let mut code = EXIT_OK;
    for row in &rows {
        match &row.outcome {
            Outcome::Failed(e) => {
                eprintln!("{}: {e}", row.agent_kind);
                code = EXIT_RUNTIME;
            }
            Outcome::Infeasible { budget, minimum } => {
                eprintln!("{}: {budget}-parameter budget infeasible, needs at least {minimum}", row.agent_kind)
            }
            Outcome::Finished { .. } => {}
        }
    }
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train { config } => train(config),
        Command::Gradcheck { trials, seed, shift } => gradcheck(trials, seed, shift),
        Command::Compare { configs, out } => compare(configs, out),
    };
    let code = result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.exit_code()
    });
    ExitCode::from(code as u8)
}
