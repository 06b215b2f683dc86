//! Command-line experiment runner for the `ewpitman` toolkit.
//!
//! A run is fully determined by its configuration and seed: results are
//! identical for any worker count, and reports are written atomically.

pub mod config;
pub mod error;
pub mod report;
pub mod run;

pub use config::{parse_config, Command, ExperimentConfig, Format, Grid};
pub use error::CliError;
pub use report::{RunReport, Table};
pub use run::run;

/// Parses `argv`, runs the command on `--threads` workers and writes the
/// report. Returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let outcome = parse_config(argv).and_then(|config| {
        let report = ewpitman::exec::with_threads(config.threads, || run(&config))?;
        report.write()
    });
    match outcome {
        Ok(()) => 0,
        Err(CliError::Info(text)) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("{}", e.record());
            e.exit_code()
        }
    }
}
