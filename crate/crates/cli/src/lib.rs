//! Batch front end: `solve`, `simulate`, `verify` and `convergence`.

pub mod commands;
pub mod config;
pub mod model_file;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

pub use commands::Status;
pub use config::{Overrides, Run, RunConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Solve,
    Simulate,
    Verify,
    Convergence,
}

#[derive(Debug, Parser)]
#[command(name = "singular-hjb", version, about = "Optimal liquidation with a singular terminal condition")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `out` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides `[mc].seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `[mc].paths`.
    #[arg(long)]
    pub paths: Option<usize>,
}

pub const EXIT_FAULT: u8 = 1;
pub const EXIT_VERIFICATION: u8 = 2;

pub fn execute(cli: &Cli) -> anyhow::Result<Status> {
    let overrides = Overrides { out: cli.out.clone(), seed: cli.seed, paths: cli.paths };
    let run = Run::new(&cli.config, &overrides)?;
    match cli.command {
        Command::Solve => commands::cmd_solve(&run),
        Command::Simulate => commands::cmd_simulate(&run),
        Command::Verify => commands::cmd_verify(&run),
        Command::Convergence => commands::cmd_convergence(&run),
    }
}

/// Maps the outcome onto the exit-code contract: 0 success, 1 fault, 2 verification failure.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_FAULT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(Status::Success) => ExitCode::SUCCESS,
        Ok(Status::VerificationFailed) => ExitCode::from(EXIT_VERIFICATION),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FAULT)
        }
    }
}
