use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hinf_lab::commands::{self, SearchOptions, DEFAULT_A_MAX, DEFAULT_GRID, DEFAULT_TOL};
use hinf_lab::{exit, CliError};

/// Constrained H-infinity consensus experiments.
///
/// Exit status: 0 success or feasible, 1 infeasible or runtime failure,
/// 2 malformed scenario, 3 precondition failure (disconnected graph, fewer
/// than two agents, missing manifest).
#[derive(Parser)]
#[command(name = "hinf-lab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone, Copy)]
struct Search {
    /// Upper end of the search interval for `a`.
    #[arg(long = "a-max", default_value_t = DEFAULT_A_MAX)]
    a_max: f64,
    /// Number of log-spaced grid points scanned before refinement.
    #[arg(long, default_value_t = DEFAULT_GRID)]
    grid: usize,
}

impl From<Search> for SearchOptions {
    fn from(s: Search) -> Self {
        Self { a_max: s.a_max, grid: s.grid }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the gamma-attenuation certificate for a scenario.
    Check {
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        search: Search,
    },
    /// Integrate a scenario and write trace, metrics, certificate and manifest.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        search: Search,
    },
    /// Bisect for the smallest certifiable gamma.
    GammaMin {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[command(flatten)]
        search: Search,
    },
    /// Summarize a finished run directory.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Check { scenario, search } => {
            let cert = commands::check(&scenario, search.into(), &mut out)?;
            Ok(if cert.feasible { exit::OK } else { exit::FAILURE })
        }
        Command::Simulate { scenario, out: dir, search } => {
            commands::simulate(&scenario, &dir, search.into(), &mut out)?;
            Ok(exit::OK)
        }
        Command::GammaMin { scenario, tol, search } => {
            commands::gamma_min(&scenario, tol, search.into(), &mut out)?;
            Ok(exit::OK)
        }
        Command::Report { out: dir } => {
            commands::report(&dir, &mut out)?;
            Ok(exit::OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::PARSE as u8 } else { exit::OK as u8 });
        }
    };
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            let _ = std::io::stdout().flush();
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
