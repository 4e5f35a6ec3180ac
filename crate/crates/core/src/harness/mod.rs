//! Experiment driver behind the `abo` binary: config parsing, runs,
//! history files, summaries and the verification suites.

pub mod config;
pub mod experiment;
pub mod history;
pub mod summary;
pub mod verify;

pub use config::{ConfigError, ExperimentConfig};
pub use experiment::{run_experiment, Manifest, RunOptions};
pub use summary::{summarize, SummaryTable};
pub use verify::{run_suite, Suite, VerifyOptions};

/// Process exit codes of the `abo` binary.
pub mod exit {
    pub const OK: i32 = 0;
    /// A verification check failed, or summarize skipped a history file.
    pub const FAILED: i32 = 1;
    pub const PARSE: i32 = 2;
    pub const INVALID: i32 = 3;
    /// A run aborted (non-finite objective value or solver failure).
    pub const ABORTED: i32 = 4;
    /// Outputs exist and `--force` was not given.
    pub const REFUSED: i32 = 5;
}
