//! Keypoint ingestion, gap interpolation, windowed feature extraction and
//! the PCA posture space.

mod extract;
mod keypoints;
mod matrix;
mod pca;
mod window;

pub use extract::{channel_features, extract_features, extract_matrix, feature_names, spectral_centroid, CHANNEL_FEATURES};
pub use keypoints::{
    interpolate_missing, joint_names, InterpolationReport, Keypoint, KeypointSeries, Role, COCO_JOINTS,
    DEFAULT_MISSING_THRESHOLD, FILLED_CONFIDENCE,
};
pub use matrix::{FeatureMatrix, WindowProvenance};
pub use pca::{pca_fit, pca_fit_rows, PcaModel};
pub use window::{make_windows, Window, WindowSpec};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FeatureError {
    #[error("keypoint series has no frames")]
    EmptySeries,
    #[error("invalid keypoint series: {0}")]
    InvalidSeries(String),
    #[error("invalid window spec: length {length_s} s, stride {stride_s} s")]
    InvalidWindowSpec { length_s: f64, stride_s: f64 },
    #[error("series of {duration} s is shorter than a {length_s} s window")]
    SeriesTooShort { duration: f64, length_s: f64 },
    #[error("window has {0} frames; need at least 2")]
    WindowTooShort(usize),
    #[error("non-finite feature at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("feature matrices differ in feature names or window spec")]
    IncompatibleMatrices,
    #[error("requested {requested} components but only {available} are available")]
    RankDeficient { requested: usize, available: usize },
    #[error("io: {0}")]
    Io(String),
}
