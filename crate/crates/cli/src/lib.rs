//! Command-line front end for distboost: ingestion, fitting, prediction and
//! diagnostic export over delimited text files.

pub mod commands;
pub mod config;
pub mod error;
pub mod ingest;

pub use commands::{run, Cli, Command};
pub use error::{CliError, CliResult};

/// Parse `args` and run the command, returning the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use clap::Parser;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
