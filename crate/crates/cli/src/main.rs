//! `kdvstar` command-line driver. Every subcommand reads one JSON
//! configuration, prints a JSON summary on stdout and, when an output
//! directory is configured, writes its tables and a run manifest there.

mod commands;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kdvstar::graph::Mode;

#[derive(Debug, Parser)]
#[command(name = "kdvstar", version, about = "KdV equation on a metric star graph")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.path` from the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Linear,
    Nonlinear,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Linear => Mode::Linear,
            ModeArg::Nonlinear => Mode::Nonlinear,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// March the configuration to its horizon and write snapshots and the energy ledger.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Abort when the compatibility pre-check fails instead of warning.
        #[arg(long)]
        strict: bool,
        /// Also write the spatial operator as row,col,value triples.
        #[arg(long)]
        dump_operator: bool,
    },
    /// Check the trace compatibility conditions of the initial and boundary data.
    CheckCompat {
        #[command(flatten)]
        common: Common,
        /// Regularity index.
        #[arg(long)]
        s: f64,
        /// Defaults to the configured mode.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Defaults to 1e-9 for polynomial signals and 1e-5 for sampled ones.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Print the lifting profiles used to homogenize the boundary data.
    Lift {
        #[command(flatten)]
        common: Common,
    },
    /// Grid-refinement study against the configured manufactured solution.
    Convergence {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 4)]
        levels: usize,
        /// Exit with status 2 when the final observed order is below this value.
        #[arg(long, num_args = 0..=1, default_missing_value = "1.7")]
        assert_order: Option<f64>,
    },
    /// Run with the energy ledger and report its residuals.
    EnergyAudit {
        #[command(flatten)]
        common: Common,
    },
    /// Window Picard iteration over [0, W] with observed contraction ratios.
    Picard {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        window: f64,
    },
}

#[derive(Debug)]
pub enum CliError {
    Solver(kdvstar::Error),
    Io(PathBuf, std::io::Error),
    Usage(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Solver(e) => write!(f, "{e}"),
            CliError::Io(p, e) => write!(f, "{}: {e}", p.display()),
            CliError::Usage(m) => f.write_str(m),
        }
    }
}

impl From<kdvstar::Error> for CliError {
    fn from(e: kdvstar::Error) -> Self {
        CliError::Solver(e)
    }
}

fn configure_threads() {
    let Ok(v) = std::env::var("KDVSTAR_THREADS") else {
        return;
    };
    match v.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        _ => eprintln!("warning: ignoring KDVSTAR_THREADS={v:?}, expected a positive integer"),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    configure_threads();
    let argv: Vec<String> = std::env::args().collect();
    ExitCode::from(commands::dispatch(cli.command, argv) as u8)
}
