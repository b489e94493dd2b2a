//! Library side of the `shgcn` command: run configuration, run-directory
//! layout and the train/evaluate/grid drivers.

pub mod config;
pub mod run;

pub use config::{DataConfig, RunConfig};

use shgcn::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

/// Process exit code for an error: bad configuration is a usage error,
/// non-finite math is numeric, everything about inputs and files is data.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => EXIT_USAGE,
        Error::Numeric(_) => EXIT_NUMERIC,
        Error::InvalidInput(_)
        | Error::Parse { .. }
        | Error::Contract(_)
        | Error::NotFound(_)
        | Error::Checkpoint(_)
        | Error::Io(_)
        | Error::Json(_) => EXIT_DATA,
    }
}
