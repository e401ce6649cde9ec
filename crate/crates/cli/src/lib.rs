//! Driver for the `lrgw` library: JSON configuration, the end-to-end run,
//! the validation suite, the scaling benchmark and CSV reports.
//!
//! Exit codes: 0 success, 1 validation or numerical failure, 2
//! configuration or input precondition error.

pub mod config;
pub mod error;
pub mod output;
pub mod report;
pub mod run;
pub mod scale;
pub mod validate;

pub use config::RunConfig;
pub use error::{CliError, Result, EXIT_CONFIG, EXIT_FAILURE, EXIT_SUCCESS};

/// Sizes the global rayon pool. Only the first call takes effect.
pub fn init_threads(threads: usize) {
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
}
