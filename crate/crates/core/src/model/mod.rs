//! Domain types shared across the pipeline: activity classes, timestamps,
//! labeled intervals, activity logs and the procedure grammar.
//!
//! All types are immutable once constructed and are `Send + Sync`.

mod class;
mod log;
mod procedure;
mod time;

pub use class::{class_from_name, ActivityClass, ClassNames};
pub use log::{ActivityInterval, ActivityLog, LogSource};
pub use procedure::{Phase, PhaseGroup, ProcedureModel};
pub use time::{mmss_to_seconds, TimeStamp, CONTINUITY_TOLERANCE_S};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("unknown activity class name {0:?}")]
    UnknownClassName(String),
    #[error("unknown activity class id {0}")]
    UnknownClassId(i64),
    #[error("malformed mm:ss timestamp {0:?}")]
    MalformedTimestamp(String),
    #[error("timestamp must be finite and non-negative, got {0}")]
    InvalidTimeStamp(f64),
    #[error("interval start {start} must be before stop {stop}")]
    EmptyInterval { start: f64, stop: f64 },
    #[error("intervals not sorted by start at index {index}")]
    Unsorted { index: usize },
    #[error("gap or overlap before interval {index}")]
    Discontinuous { index: usize },
    #[error("invalid procedure model: {0}")]
    InvalidProcedure(String),
    #[error("invalid synonym table: {0}")]
    SynonymTable(String),
    #[error("json: {0}")]
    Json(String),
}
