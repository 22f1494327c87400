//! `gep`: data validation, scenario generation, market clearing, expansion
//! planning and the two planning studies from the command line.

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;

use crate::args::Cli;

/// Exit codes: 2 is left to clap for usage errors.
fn exit_code(err: &anyhow::Error) -> u8 {
    use gep_core::Error;
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(Error::MissingFile(_)) => 3,
        Some(Error::Parse { .. } | Error::Validation(_) | Error::UndefinedCorrelation(_)) => 4,
        Some(Error::Cap { .. }) => 5,
        Some(Error::Solver(_) | Error::Lp(_)) => 6,
        Some(Error::Io { .. }) | None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
