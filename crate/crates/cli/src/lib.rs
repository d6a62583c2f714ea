//! `condensate` command-line front end. Every subcommand writes into a run
//! directory together with the resolved config (`config.toml`, loadable
//! with `--config`) and a manifest holding the code version, the fields that
//! fell back to defaults and a SHA-256 of each output.
//!
//! Exit codes: 0 success, 1 invalid input, 2 numerical failure, 3 I/O or
//! integrity error.

pub mod commands;
pub mod config;
pub mod error;
pub mod nrc1;
pub mod output;

use std::ffi::OsString;

use clap::error::ErrorKind;
use clap::Parser;

pub use commands::Cli;
pub use error::CliError;

/// Parses `args` (program name first), runs the command, returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match commands::dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("condensate: {e}");
            e.exit_code()
        }
    }
}
