//! Verifiable activity recognition and explainable feedback for endotracheal
//! suctioning training videos.
//!
//! The crate is organized as a pipeline:
//!
//! * [`model`]: activity classes, timestamps, logs and the procedure grammar
//! * [`parser`]: LLM output → [`model::ActivityLog`], with timestamp repair
//! * [`sequence`]: grammar validation and round segmentation
//! * [`metrics`]: interval accuracy, macro-F1, confusion, aggregation, t-tests
//! * [`features`]: keypoint ingestion, windowing, feature extraction, PCA
//! * [`anomaly`]: isolation forest and Shapley attribution
//! * [`feedback`]: student reports and alignment bundles
//! * [`llm`]: prompt assembly and a record/replay LLM gateway

pub mod anomaly;
pub mod features;
pub mod feedback;
pub mod llm;
pub mod metrics;
pub mod model;
pub mod parser;
pub mod sequence;

pub use model::{ActivityClass, ActivityInterval, ActivityLog, LogSource, ProcedureModel, TimeStamp};
