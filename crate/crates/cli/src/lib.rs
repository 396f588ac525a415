//! Batch front end for the `imagtime` solver: argument parsing, experiment
//! orchestration and CSV output.

pub mod args;
pub mod csv;
pub mod experiments;

use std::process::ExitCode;

pub use args::{parse_args, Experiment, RunSpec, UsageError};
pub use csv::{write_csv, CsvReport};

/// Printed once per invocation.
pub const NORMALIZATION_NOTICE: &str =
    "note: each step is renormalized by dividing by sqrt(N_h), the discrete L2 norm";

/// Process exit codes, ordered by severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExitStatus {
    Success = 0,
    NotConverged = 1,
    Usage = 2,
    Io = 3,
}

impl From<ExitStatus> for ExitCode {
    fn from(s: ExitStatus) -> Self {
        ExitCode::from(s as u8)
    }
}

/// Runs the experiment and writes its CSV, including partial results.
pub fn execute(spec: &RunSpec) -> ExitStatus {
    eprintln!("{NORMALIZATION_NOTICE}");
    let outcome = experiments::run(&spec.experiment, spec.threads);
    if let Err(e) = write_csv(&outcome.report, &spec.out) {
        eprintln!("error: {e}");
        return ExitStatus::Io;
    }
    if outcome.status != ExitStatus::Success {
        eprintln!(
            "warning: see trailing comments in {} (exit {})",
            spec.out.display(),
            outcome.status as u8
        );
    }
    outcome.status
}
