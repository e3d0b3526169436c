//! `neuro-attitude`: simulate IMU datasets, train and prune spiking
//! estimators, tune classical filters and evaluate them all on one footing.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "neuro-attitude", version, about)]
struct Cli {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed for every random draw (default 42).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    force: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic flights with a manifest.
    Simulate(SimulateArgs),
    /// Train a spiking estimator.
    Train(TrainArgs),
    /// Tune a classical filter with particle swarm optimization.
    Tune(TuneArgs),
    /// Score an estimator against ground truth.
    Eval(EvalArgs),
    /// Remove rarely spiking neurons from a checkpoint.
    Prune(PruneArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Source {
    Sim,
    Px4,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Number of flights (default 5).
    #[arg(long)]
    n: Option<usize>,
    /// Flight length in seconds (default 100).
    #[arg(long)]
    seconds: Option<f64>,
    /// Sample rate in Hz (default 200).
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long, value_enum, default_value = "sim")]
    source: Source,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory of dataset CSVs.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Encoding layer size (default 100).
    #[arg(long)]
    n_enc: Option<usize>,
    /// Recurrent layer size (default 100).
    #[arg(long)]
    n_hid: Option<usize>,
    /// Upper bound on training epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Train on random windows of this many samples.
    #[arg(long)]
    window: Option<usize>,
    /// Train at full precision instead of on the hardware grid.
    #[arg(long)]
    float: bool,
    /// Skip adding the three mirror images of each training flight.
    #[arg(long)]
    no_mirror: bool,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    /// complementary, mahony, madgwick or ekf.
    #[arg(long)]
    filter: String,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    particles: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// complementary, complementary_adaptive, mahony, madgwick, ekf or snn.
    #[arg(long)]
    estimator: String,
    /// Filter parameter file or network checkpoint. Filters fall back to
    /// their defaults without it.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Start filters at the true attitude.
    #[arg(long)]
    known_initial: bool,
    /// none, zero_gyro, zero_accel or gravity_accel.
    #[arg(long, default_value = "none")]
    input_mode: String,
    /// Also write per-sequence estimate traces.
    #[arg(long)]
    traces: bool,
}

#[derive(Debug, Args)]
pub struct PruneArgs {
    /// Network checkpoint.
    #[arg(long)]
    params: PathBuf,
    /// Calibration data for measuring spike activity.
    #[arg(long)]
    data: PathBuf,
    /// Held-out data to compare errors before and after pruning.
    #[arg(long)]
    eval_data: Option<PathBuf>,
    /// Minimum firing fraction to keep a neuron (default 0.005).
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("NEURO_ATTITUDE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Validation(format!("NEURO_ATTITUDE_THREADS=`{v}` is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Validation(e.to_string()))
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    let file = config::FileConfig::load(cli.config.as_deref())?;
    let ctx = commands::Context {
        seed: cli.seed.or(file.seed).unwrap_or(config::DEFAULT_SEED),
        force: cli.force,
        file,
    };
    match cli.command {
        Command::Simulate(a) => commands::simulate(&ctx, a),
        Command::Train(a) => commands::train(&ctx, a),
        Command::Tune(a) => commands::tune(&ctx, a),
        Command::Eval(a) => commands::eval(&ctx, a),
        Command::Prune(a) => commands::prune(&ctx, a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
