//! `qmem`: mode analysis of a high-speed atomic-ensemble quantum memory.

mod commands;
mod config;
mod output;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Format, Layer, MixNormArg, TransformArg};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] qmem::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("self-test failed: {0}")]
    Selftest(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(qmem::Error::Numerical(_) | qmem::Error::Consistency(_)) => 4,
            CliError::Core(_) => 3,
            CliError::Selftest(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "qmem",
    version,
    about = "Schmidt modes, storage with atomic motion and efficiencies of a quantum memory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    run: RunArgs,

    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Cell length in optical-depth units.
    #[arg(long, global = true, allow_negative_numbers = true)]
    length: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    write_duration: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    read_duration: Option<f64>,
    /// Sets write and read durations together.
    #[arg(long, global = true, allow_negative_numbers = true)]
    duration: Option<f64>,
    /// Space grid points.
    #[arg(long, global = true)]
    nz: Option<usize>,
    /// Time grid points.
    #[arg(long, global = true)]
    nt: Option<usize>,
    /// Nodes of the inner kernel integral (default: nt).
    #[arg(long, global = true)]
    inner_n: Option<usize>,
    /// Number of Schmidt modes.
    #[arg(long, global = true)]
    modes: Option<usize>,
    /// Mean extension of free expansion during storage.
    #[arg(long, global = true, allow_negative_numbers = true)]
    delta_l: Option<f64>,
    /// Complete mixing of the atoms during storage.
    #[arg(long, global = true)]
    mixing: bool,
    #[arg(long, global = true, value_enum)]
    transform: Option<TransformArg>,
    #[arg(long, global = true, value_enum)]
    mix_norm: Option<MixNormArg>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// `key = value` configuration file; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

impl RunArgs {
    fn layer(&self) -> Layer {
        Layer {
            length: self.length,
            write_duration: self.write_duration,
            read_duration: self.read_duration,
            duration: self.duration,
            nz: self.nz,
            nt: self.nt,
            inner_n: self.inner_n,
            modes: self.modes,
            delta_l: self.delta_l,
            mixing: self.mixing.then_some(true),
            transform: self.transform,
            mix_norm: self.mix_norm,
            out: self.out.clone(),
            format: self.format,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Singular values and Schmidt modes of the full cycle.
    Modes,
    /// Spin-wave response functions of the Schmidt modes.
    Response,
    /// Response functions after storage, with the scaling map.
    Store,
    /// Overlap matrix between stored and original response functions.
    Overlap,
    /// Retrieved pulse profiles and efficiencies.
    Cycle,
    /// Eigenmodes of the cycle with moving atoms.
    Optimize,
    /// Leading singular values against the stage duration.
    Sweep {
        /// Durations to evaluate (comma separated).
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_values_t = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0])]
        durations: Vec<f64>,
    },
    /// Whether the gas is far from quantum degeneracy.
    Check {
        /// Kelvin.
        #[arg(long, default_value_t = 100e-6, allow_negative_numbers = true)]
        temperature: f64,
        /// Atoms per cubic metre.
        #[arg(long, default_value_t = 1e15, allow_negative_numbers = true)]
        concentration: f64,
        /// Atomic mass in kilograms.
        #[arg(long, default_value_t = 2.207e-25, allow_negative_numbers = true)]
        mass: f64,
    },
    /// Runs the invariant suite.
    Selftest,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let file = cli.run.config.as_deref().map(config::load_config).transpose()?;
    let cfg = config::resolve(file.as_ref(), &cli.run.layer())?;
    match &cli.command {
        Command::Modes => commands::modes(&cfg),
        Command::Response => commands::response(&cfg),
        Command::Store => commands::store(&cfg),
        Command::Overlap => commands::overlap(&cfg),
        Command::Cycle => commands::cycle(&cfg),
        Command::Optimize => commands::optimize(&cfg),
        Command::Sweep { durations } => commands::sweep(&cfg, durations),
        Command::Check {
            temperature,
            concentration,
            mass,
        } => commands::check(&cfg, *temperature, *concentration, *mass),
        Command::Selftest => selftest::run(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qmem: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
