//! `exhaustkit` batch command line.

mod args;
mod commands;
mod config;
mod output;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;

use clap::Parser;

use crate::args::Cli;
use crate::commands::CliError;

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    ExitCode::from(dispatch(argv))
}

/// Runs one invocation and maps the outcome to the exit status:
/// 0 success, 1 usage error, 2 data error, 3 internal error.
fn dispatch(argv: Vec<String>) -> u8 {
    let argv = match config::merge_config(argv) {
        Ok(a) => a,
        Err(e) => return report(&e),
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match catch_unwind(AssertUnwindSafe(|| commands::run(cli, &argv))) {
        Ok(Ok(())) => 0,
        Ok(Err(e)) => report(&e),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .map(String::as_str)
                .or_else(|| panic.downcast_ref::<&str>().copied())
                .unwrap_or("unknown panic");
            report(&CliError::Internal(msg.to_string()))
        }
    }
}

fn report(e: &CliError) -> u8 {
    eprintln!("exhaustkit: {e}");
    e.exit_code()
}
