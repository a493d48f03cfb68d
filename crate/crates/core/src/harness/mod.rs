//! Configuration, orchestration and CSV output of the command-line experiments.

pub mod commands;
pub mod config;
pub mod table;

pub use commands::{cmd_bias, cmd_measure, cmd_simulate, cmd_sweep, run, Command};
pub use config::{RunConfig, SweepAxis};
pub use table::{format_value, ResultTable};

use crate::error::Error;

pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_CONVERGENCE: i32 = 4;

/// Process exit code for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Parameter(_) => EXIT_CONFIG,
        Error::Numeric(_) | Error::DegenerateDistance { .. } => EXIT_NUMERIC,
        Error::Convergence { .. } => EXIT_CONVERGENCE,
        Error::Io(_) => EXIT_IO,
    }
}
