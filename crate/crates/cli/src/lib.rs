//! Command-line front end: argument parsing, file formats and the
//! `smmfit` subcommands.

pub mod commands;
pub mod io;

use std::process::ExitCode;

use clap::Parser;

pub use commands::{run, Cli, CliError, Outcome};

/// Parse `args`, run the command and map the result to an exit code:
/// 0 success, 1 finished with numerical warnings, 2 usage or I/O error.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::Warnings(msg)) => {
            eprintln!("warning: {msg}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
