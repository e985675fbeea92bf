//! Isolation-forest scoring of motion windows against expert recordings,
//! with Shapley attribution of the scores.

mod forest;
mod shapley;

pub use forest::{
    c_factor, classify, fit_forest, fit_forest_rows, height_limit, score_from_path_length, ForestParams,
    IsolationForestModel, IsolationTree, Node, PerClassForest, DEFAULT_SUBSAMPLE, DEFAULT_THRESHOLD, DEFAULT_TREES,
};
pub use shapley::{
    exact_shapley, exact_shapley_mean, permutation_shapley, shapley_attribution, AttributionVector, MAX_EXACT_FEATURES,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnomalyError {
    #[error("need at least 2 training rows, got {0}")]
    InsufficientData(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("background set is empty")]
    EmptyBackground,
    #[error("exact enumeration supports at most 12 features, got {0}")]
    TooManyFeatures(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("json: {0}")]
    Json(String),
}
