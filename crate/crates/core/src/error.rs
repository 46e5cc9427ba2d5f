use std::path::{Path, PathBuf};

use crate::model::{ProblemViolation, ScheduleViolation};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid problem: {}", join(.0))]
    InvalidProblem(Vec<ProblemViolation>),

    #[error("invalid schedule: {}", join(.0))]
    InvalidSchedule(Vec<ScheduleViolation>),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("search space of {product} assignments exceeds the cap of {cap}")]
    SearchSpaceOverflow { product: u128, cap: u128 },

    #[error("unknown {kind} `{id}`")]
    UnknownId { kind: &'static str, id: String },

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },

    #[error("reports were produced from different traces or seeds ({0})")]
    MismatchedReports(String),

    #[error("simulation stalled at t={time}: {reason}")]
    SimulationStalled { time: f64, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

/// Attaches the offending path to an I/O error.
pub(crate) fn io_at(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}
