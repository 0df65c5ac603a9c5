//! Scenario runner, mechanism auditor and bound verifier behind the `imdp` binary.

pub mod commands;
pub mod scenario;

use imdp_core::oracle::OracleError;
use imdp_core::protocol::ProtocolError;
use thiserror::Error;

pub use commands::{
    audit_mechanism, list_mechanisms, run_many, run_scenario, verify_many, verify_scenario,
    Document, MeasureKind, RunOutcome, RunReport, VerifyOptions, VerifyReport,
};
pub use scenario::{Machine, Scenario};

/// Version stamped into every JSON document the CLI emits.
pub const FORMAT_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_BUDGET_HALT: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed {what}: {source}")]
    Json {
        what: String,
        source: serde_json::Error,
    },
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}
