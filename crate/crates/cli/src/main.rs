//! `qbrown`: runs the kernel, finite-bath, Lindblad, conditional-expectation,
//! decoherence and discrete-chain pipelines from a JSON config.

mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(String),

    #[error(transparent)]
    Core(#[from] qbrown::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use qbrown::Error as E;
        match self {
            Self::Config(_) => 2,
            Self::Io(_) => 1,
            Self::Core(e) => match e {
                E::Config(_) | E::Domain(_) | E::DegenerateInput(_) | E::Json(_) => 2,
                E::Numeric(_) | E::Pole { .. } => 4,
                E::Io(_) | E::Csv(_) => 1,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
enum Command {
    /// G(t,s), the two-point function and the limit kernels on a time grid
    Kernel,
    /// Finite-bath deviation from the Markov limit for a list of couplings
    BathConverge,
    /// Diagonal spectrum, relaxation and a cat-state decoherence sweep
    Lindblad,
    /// Conditional expectations of a Weyl word at several times
    Conditional,
    /// Decoherence ratio of a cat state, closed form against propagation
    Decoherence,
    /// Exit-time histogram of the discrete chain with a geometric fit
    Discrete,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Self::Kernel => "kernel",
            Self::BathConverge => "bath-converge",
            Self::Lindblad => "lindblad",
            Self::Conditional => "conditional",
            Self::Decoherence => "decoherence",
            Self::Discrete => "discrete",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qbrown", version, about = "Quantum phase-space Brownian motion toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// CSV output path (stdout if absent); overrides the config
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// RNG seed; overrides the config
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Run the invariant suite and exit with 3 if it fails
    #[arg(long, global = true)]
    check: bool,

    /// Worker threads
    #[arg(long, global = true)]
    workers: Option<usize>,
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(tag) = &cfg.command {
        if tag != cli.command.name() {
            return Err(CliError::Config(format!("config is for '{tag}' but '{}' was requested", cli.command.name())));
        }
    }
    let seed = cli.seed.or(cfg.seed).or(cfg.chain.map(|c| c.seed)).unwrap_or(0);
    let out_path = cli.out.clone().or_else(|| cfg.out.clone());

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Config("--workers must be positive".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Config(e.to_string()))?;
    let check = cli.check;
    let output = pool.install(|| match cli.command {
        Command::Kernel => commands::kernel(&cfg, check),
        Command::BathConverge => commands::bath_converge(&cfg, check),
        Command::Lindblad => commands::lindblad(&cfg, check),
        Command::Conditional => commands::conditional(&cfg, seed, check),
        Command::Decoherence => commands::decoherence(&cfg, seed, check),
        Command::Discrete => commands::discrete(&cfg, seed, check),
    })?;

    match &out_path {
        Some(path) => std::fs::write(path, &output.csv).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
        None => std::io::stdout().write_all(&output.csv).map_err(|e| CliError::Io(e.to_string()))?,
    }
    let mut err = std::io::stderr();
    for w in &output.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    let _ = writeln!(err, "{}", output.summary);
    for f in &output.failures {
        let _ = writeln!(err, "invariant failed: {f}");
    }
    Ok(output.failures.is_empty())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
