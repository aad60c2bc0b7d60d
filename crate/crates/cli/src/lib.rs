//! Batch driver for quasilab: configuration, subcommands and output files.

pub mod commands;
pub mod config;
pub mod output;
pub mod selftest;

use quasilab_core::ErrorClass;

pub use commands::{cmd_cfrac, cmd_gordon, cmd_lyap, Outcome};
pub use config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;
pub const EXIT_SCALE: i32 = 4;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config(String),
    Io(String),
    Core(quasilab_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => EXIT_CONFIG,
            CliError::Core(e) => match e.class() {
                ErrorClass::Config => EXIT_CONFIG,
                ErrorClass::Violation => EXIT_VIOLATION,
                ErrorClass::ScaleBudget => EXIT_SCALE,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<quasilab_core::Error> for CliError {
    fn from(e: quasilab_core::Error) -> Self {
        CliError::Core(e)
    }
}

/// Runs the selftest suites; exit code 3 if any fails.
pub fn cmd_selftest(opts: &selftest::SelftestOptions) -> Outcome {
    let results = selftest::run_all(opts);
    let failed = results.iter().any(|r| !r.pass);
    Outcome {
        stdout: selftest::render(&results),
        exit_code: if failed { EXIT_VIOLATION } else { EXIT_OK },
    }
}
