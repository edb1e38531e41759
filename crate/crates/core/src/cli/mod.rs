//! The `graphon-lqr` experiment driver.

pub mod config;
mod run;

pub use run::{
    build_experiment, check_experiment, compare_files, load_experiment, run_experiment,
    run_oracle_only, sbm_adjacency, CheckOutcome, Experiment, MethodReport, OracleReport,
    OscillatorSetup, RunOptions, RunOutcome, RunReport, SampledCoupling,
};

use crate::error::Error;

/// Exit status for `check` when the basis is invariant but some coupling is
/// not low-rank on it.
pub const EXIT_APPROXIMATE_ONLY: i32 = 10;

/// Process exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 2,
        Error::Certificate { .. } => 3,
        Error::Integration { .. } => 4,
        Error::Io(_) | Error::Csv(_) => 5,
        Error::Dimension(_) | Error::Construction(_) | Error::Range(_) | Error::Precondition(_) => 6,
    }
}
