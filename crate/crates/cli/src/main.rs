//! `hpe`: simulate, shoot for periodic orbits, find steady states, compare
//! resolutions and run the self-test.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hpe_core::HpeError;

mod commands;

#[derive(Parser, Debug)]
#[command(name = "hpe", version, about = "Spectral solver for the isothermal primitive equations in a periodic channel")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory (overrides output.dir).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Fixed-point method: picard or newton.
    #[arg(long, global = true)]
    method: Option<String>,

    #[arg(long, global = true)]
    tol: Option<f64>,

    #[arg(long = "max-iters", global = true)]
    max_iters: Option<usize>,

    /// Resolution override, e.g. 16x16x12.
    #[arg(long, global = true, value_name = "MxNxK")]
    resolution: Option<String>,

    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Integrate forward and check the energy estimates along the way.
    Simulate,
    /// Find a time-periodic orbit by shooting.
    Periodic,
    /// Find a steady state.
    Steady,
    /// Twin runs at a coarse and the configured resolution.
    Compare,
    /// Run the built-in invariant suite.
    Selftest,
}

pub(crate) struct Overrides {
    pub out: Option<PathBuf>,
    pub method: Option<String>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub resolution: Option<String>,
    pub seed: Option<u64>,
}

/// Exit status for an error: 2 no convergence, 3 invalid input, 4 blow-up.
fn exit_code(e: &HpeError) -> u8 {
    match e {
        HpeError::NoConvergence { .. } => 2,
        HpeError::Validation { .. }
        | HpeError::Parse(_)
        | HpeError::InvalidDimension(_)
        | HpeError::IncompatibleProblem(_)
        | HpeError::ShapeMismatch(_)
        | HpeError::GridMismatch => 3,
        HpeError::BlowUp { .. } => 4,
        _ => 1,
    }
}

fn init_threads() {
    let n = match std::env::var("HPE_THREADS") {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) => n,
            Err(_) => {
                log::warn!("ignoring HPE_THREADS={s:?}: not a number");
                0
            }
        },
        Err(_) => 0,
    };
    if n > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    init_threads();
    let ov = Overrides {
        out: cli.out,
        method: cli.method,
        tol: cli.tol,
        max_iters: cli.max_iters,
        resolution: cli.resolution,
        seed: cli.seed,
    };
    let result = match cli.command {
        Command::Selftest => commands::selftest(cli.config.as_deref(), &ov),
        cmd => match cli.config.as_deref() {
            None => Err(HpeError::Validation {
                field: "--config".into(),
                message: "this subcommand needs a configuration file".into(),
            }),
            Some(path) => match cmd {
                Command::Simulate => commands::simulate(path, &ov),
                Command::Periodic => commands::periodic(path, &ov),
                Command::Steady => commands::steady(path, &ov),
                Command::Compare => commands::compare(path, &ov),
                Command::Selftest => unreachable!(),
            },
        },
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
