use std::process::ExitCode;

use clap::Parser;
use reclaimsim::cli::{execute, exit_code, Cli, Outcome};

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::InvariantViolated) => {
            eprintln!("error: a hard invariant was violated; see the results table");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
