use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adsis_cli::figures::{reproduce, Figure};
use adsis_cli::{run_with_workers, write_artifacts, CliError, ExperimentConfig, ExperimentKind, OUT_DIR_ENV};
use clap::{Parser, Subcommand};

/// Activity-driven adaptive SIS experiments.
#[derive(Parser)]
#[command(name = "adsis", version)]
struct Cli {
    /// Output directory [default: config `output.dir`, then `adsis-out`].
    #[arg(long, global = true, env = OUT_DIR_ENV)]
    out: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweep points and replicates.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo decay rates and their upper bounds.
    Simulate(RunArgs),
    /// Closed-form upper bounds.
    Bound(RunArgs),
    /// Exact decay rates from the full Markov chain (n <= 6).
    Exact(RunArgs),
    /// Optimal investments in adaptation factors and acceptance rates.
    Allocate(RunArgs),
    /// Regenerate the data and plots of a figure.
    ReproduceFigure {
        #[arg(value_enum)]
        figure: Figure,
        /// Use n = 250 and 10 000 replicates instead of the desk scale.
        #[arg(long)]
        full: bool,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
}

const DEFAULT_OUT: &str = "adsis-out";
const DEFAULT_FIGURE_SEED: u64 = 1;

fn report(paths: &[PathBuf]) {
    for p in paths {
        println!("{}", p.display());
    }
}

fn in_pool<T>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError>
where
    T: Send,
{
    match workers {
        None => Ok(f()),
        Some(w) => Ok(rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| CliError::Pool(e.to_string()))?
            .install(f)),
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let kind = match &cli.command {
        Command::Simulate(_) => ExperimentKind::Simulate,
        Command::Bound(_) => ExperimentKind::Bound,
        Command::Exact(_) => ExperimentKind::Exact,
        Command::Allocate(_) => ExperimentKind::Allocate,
        Command::ReproduceFigure { figure, full } => {
            let dir = cli.out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
            let seed = cli.seed.unwrap_or(DEFAULT_FIGURE_SEED);
            let outputs = in_pool(cli.workers, || reproduce(*figure, *full, seed))??;
            for o in outputs {
                for w in &o.artifacts.warnings {
                    eprintln!("warning: {w}");
                }
                report(&write_artifacts(&dir, &o.name, o.seed, &o.config, &o.artifacts)?);
            }
            return Ok(());
        }
    };
    let (Command::Simulate(args) | Command::Bound(args) | Command::Exact(args) | Command::Allocate(args)) = &cli.command
    else {
        unreachable!()
    };
    let mut config = ExperimentConfig::load(&args.config, kind)?;
    if cli.seed.is_some() {
        config.seed = cli.seed;
        config.validate()?;
    }
    let dir = cli
        .out
        .or_else(|| config.output.dir.clone())
        .unwrap_or_else(|| Path::new(DEFAULT_OUT).to_path_buf());
    let artifacts = run_with_workers(&config, cli.workers)?;
    for w in &artifacts.warnings {
        eprintln!("warning: {w}");
    }
    let echo = serde_json::to_value(&config).expect("config serializes");
    report(&write_artifacts(&dir, &config.name(), config.seed, &echo, &artifacts)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
