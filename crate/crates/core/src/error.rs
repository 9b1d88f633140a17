use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("concurrency k={k} outside calibrated domain [1, {k_max}]")]
    Domain { k: u32, k_max: u32 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("inconsistent trial grid: {0}")]
    InconsistentGrid(String),

    #[error("infeasible offset plan: {0}")]
    InfeasiblePlan(String),

    #[error("no positive initialization found for rational fit")]
    InfeasiblePositivity,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("grid aborted after {failed} failed trials out of {total}")]
    GridAborted { failed: usize, total: usize },

    #[error("{}", format_schema_issues(.0))]
    Schema(Vec<SchemaIssue>),

    #[error("simulator invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// One problem found while reading a CSV document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaIssue {
    pub line: u64,
    pub message: String,
}

fn format_schema_issues(issues: &[SchemaIssue]) -> String {
    let mut out = format!("{} schema violation(s)", issues.len());
    for issue in issues {
        out.push_str(&format!("\n  line {}: {}", issue.line, issue.message));
    }
    out
}

impl Error {
    /// True for errors caused by the data handed to an operation rather
    /// than by the environment.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}
