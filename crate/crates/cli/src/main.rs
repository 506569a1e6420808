use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use signage_explore::harness::{ablation_sweep, aggregate, report, run_scenario, Scenario};
use signage_explore::planner::Mode;

#[derive(Parser)]
#[command(name = "explore", version, about = "Signage-aware mall exploration experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Ours,
    Baseline,
}

#[derive(Subcommand)]
enum Command {
    /// Run the trials of a scenario and write per-trial artifacts.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        /// Base seed; trial i uses seed + i.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Sweep the balance factor beta.
    Ablate {
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        betas: Vec<f64>,
        #[arg(long, default_value = "out/ablation")]
        out: PathBuf,
    },
    /// Print the aggregate table for a results directory.
    Report { dir: PathBuf },
}

/// Failure classes mapped to exit codes.
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

fn classify(err: signage_explore::Error) -> Failure {
    if err.is_config_error() {
        Failure::Config(err.into())
    } else {
        Failure::Runtime(err.into())
    }
}

/// Errors raised while running trials: I/O here means artifact writing.
fn classify_run(err: signage_explore::Error) -> Failure {
    match err {
        signage_explore::Error::Io { .. } => Failure::Runtime(err.into()),
        other => classify(other),
    }
}

fn load(path: &PathBuf) -> Result<Scenario, Failure> {
    Scenario::load(path).map_err(|e| match classify(e) {
        Failure::Config(e) | Failure::Runtime(e) => {
            Failure::Config(e.context(format!("loading scenario {}", path.display())))
        }
    })
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run {
            scenario,
            out,
            trials,
            seed,
            mode,
            beta,
        } => {
            let mut scn = load(&scenario)?;
            if trials.is_some() || seed.is_some() {
                let n = trials.unwrap_or(scn.config.trials);
                let base = seed.unwrap_or(scn.config.base_seed);
                scn = scn.with_trials(n, base);
            }
            if let Some(m) = mode {
                scn = scn.with_mode(match m {
                    ModeArg::Ours => Mode::Ours,
                    ModeArg::Baseline => Mode::Baseline,
                });
            }
            if let Some(b) = beta {
                scn = scn.with_beta(b);
            }
            scn.config.validate().map_err(classify)?;
            let metrics = run_scenario(&scn, Some(&out)).map_err(classify_run)?;
            let summary = aggregate(&metrics).map_err(classify)?;
            print!("{}", summary.to_markdown());
            println!("artifacts: {}", out.display());
        }
        Command::Ablate {
            scenario,
            betas,
            out,
        } => {
            let scn = load(&scenario)?;
            let table = ablation_sweep(&scn, &betas, Some(&out)).map_err(classify_run)?;
            print!("{}", table.to_markdown());
        }
        Command::Report { dir } => {
            let table = report(&dir)
                .with_context(|| format!("reading results in {}", dir.display()))
                .map_err(Failure::Config)?;
            print!("{table}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
