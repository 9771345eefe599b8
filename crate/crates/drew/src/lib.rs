//! IO and tooling around `drew-core`: the binary store format, CSV
//! ingestion, run configuration and attack suites, golden-number files,
//! parallel suite evaluation and report writers. The `drew` binary is a thin
//! command-line layer over this crate.

pub mod config;
pub mod csv_io;
mod error;
pub mod format;
pub mod golden;
pub mod report;
pub mod suite;

pub use error::{DrewError, Result};

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const DATA: i32 = 2;
    pub const ACCEPTANCE: i32 = 3;
    pub const CALIBRATION_REQUIRED: i32 = 4;
}
