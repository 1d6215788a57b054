use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rapm_cli::commands::{self, CliError};

/// Benchmark driver for bilevel composite solvers: validate problem oracles,
/// run solvers to trace CSVs, certify convergence guarantees on the recorded
/// trajectories, and compare variants from a shared start.
///
/// Exit codes: 0 success, 1 a requested check failed, 2 usage or config
/// error, 3 runtime error (divergence, I/O).
#[derive(Parser)]
#[command(name = "rapm-cli", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the configured problem's oracles: gradients, convexity,
    /// smoothness constants, ground-truth consistency, weak sharpness.
    Validate {
        config: PathBuf,
        /// Override the problem seed (seeded problem kinds only).
        #[arg(long)]
        seed: Option<u64>,
        /// Print failures only.
        #[arg(long)]
        quiet: bool,
        /// Test hook: swap in a nonconvex upper objective.
        #[arg(long, hide = true)]
        inject_nonconvex: bool,
    },
    /// Run every configured solver; write one trace CSV per solver plus a
    /// run manifest with all resolved parameters.
    Solve {
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        quiet: bool,
    },
    /// Run the accelerated regularized method with every iterate recorded
    /// and certify the analysis inequalities along the trajectory.
    Certify {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        quiet: bool,
        /// Test hook: corrupt the recorded iterate at this index before
        /// certification.
        #[arg(long, hide = true)]
        inject_fault: Option<usize>,
    },
    /// Run all configured solvers from one shared starting point against
    /// shared reference optima; write per-solver CSVs and summary.csv.
    Compare {
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        quiet: bool,
    },
}

fn run() -> Result<bool, CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { config, seed, quiet, inject_nonconvex } => {
            let ctx = commands::prepare(&config, None, seed, quiet)?;
            commands::cmd_validate(&ctx, inject_nonconvex)
        }
        Command::Solve { config, output_dir, seed, quiet } => {
            let ctx = commands::prepare(&config, output_dir.as_deref(), seed, quiet)?;
            commands::cmd_solve(&ctx)
        }
        Command::Certify { config, seed, quiet, inject_fault } => {
            let ctx = commands::prepare(&config, None, seed, quiet)?;
            commands::cmd_certify(&ctx, inject_fault)
        }
        Command::Compare { config, output_dir, seed, quiet } => {
            let ctx = commands::prepare(&config, output_dir.as_deref(), seed, quiet)?;
            commands::cmd_compare(&ctx)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
