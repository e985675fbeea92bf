//! Interval-based evaluation of predicted activity logs.
//!
//! Logs are discretized onto a fixed time grid (midpoint sampling), after
//! which accuracy, per-class precision/recall/F1, macro-F1 and a confusion
//! matrix in seconds are computed by counting grid steps.

mod stats;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{ActivityClass, ActivityLog};

pub use stats::{
    aggregate_mean, paired_t_test, regularized_incomplete_beta, student_t_cdf, welch_t_test, TTestResult,
};

/// Default evaluation grid, in seconds.
pub const DEFAULT_RESOLUTION_S: f64 = 1.0;

// guards ceil() against representation error, e.g. 0.7 / 0.1 = 6.999…
const STEP_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("resolution must be positive and finite, got {0}")]
    InvalidResolution(f64),
    #[error("horizon {horizon} s is shorter than the log end {end} s")]
    HorizonTooShort { horizon: f64, end: f64 },
    #[error("label sequences differ in shape: {0}")]
    ShapeMismatch(String),
    #[error("label sequence is empty")]
    EmptySequence,
    #[error("class set is empty")]
    EmptyClassSet,
    #[error("none of the requested classes occur in either sequence")]
    NoClassesPresent,
    #[error("empty input")]
    EmptyInput,
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
}

/// One class id per grid step of `resolution` seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSequence {
    resolution: f64,
    horizon: f64,
    labels: Vec<ActivityClass>,
}

pub fn step_count(horizon: f64, resolution: f64) -> usize {
    ((horizon / resolution) - STEP_EPS).ceil().max(0.0) as usize
}

impl LabelSequence {
    pub fn new(resolution: f64, horizon: f64, labels: Vec<ActivityClass>) -> Result<Self, MetricsError> {
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(MetricsError::InvalidResolution(resolution));
        }
        let expected = step_count(horizon, resolution);
        if labels.len() != expected {
            return Err(MetricsError::ShapeMismatch(format!(
                "{} labels for {expected} steps",
                labels.len()
            )));
        }
        Ok(Self {
            resolution,
            horizon,
            labels,
        })
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn labels(&self) -> &[ActivityClass] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn check_aligned(&self, other: &LabelSequence) -> Result<(), MetricsError> {
        if self.resolution != other.resolution || self.horizon != other.horizon || self.len() != other.len() {
            return Err(MetricsError::ShapeMismatch(format!(
                "({} s × {}, horizon {}) vs ({} s × {}, horizon {})",
                self.resolution,
                self.len(),
                self.horizon,
                other.resolution,
                other.len(),
                other.horizon
            )));
        }
        Ok(())
    }
}

/// Sample a log at step midpoints `(t + 0.5) · resolution`.
///
/// Intervals are half-open, so a midpoint on a boundary goes to the later
/// interval. Uncovered time is labeled `Others`.
pub fn discretize(log: &ActivityLog, resolution: f64, horizon: f64) -> Result<LabelSequence, MetricsError> {
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(MetricsError::InvalidResolution(resolution));
    }
    let end = log.end();
    if horizon.is_nan() || horizon < end - crate::model::CONTINUITY_TOLERANCE_S {
        return Err(MetricsError::HorizonTooShort { horizon, end });
    }
    let n = step_count(horizon, resolution);
    let intervals = log.intervals();
    let mut labels = Vec::with_capacity(n);
    let mut cursor = 0;
    for t in 0..n {
        let mid = (t as f64 + 0.5) * resolution;
        // sorted by start; skip intervals that ended before this midpoint
        while cursor < intervals.len() && intervals[cursor].stop().seconds() <= mid {
            cursor += 1;
        }
        let class = intervals[cursor..]
            .iter()
            .take_while(|iv| iv.start().seconds() <= mid)
            .filter(|iv| iv.contains(mid))
            .last()
            .map_or(ActivityClass::Others, |iv| iv.class());
        labels.push(class);
    }
    LabelSequence::new(resolution, horizon, labels)
}

pub fn interval_accuracy(gt: &LabelSequence, pred: &LabelSequence) -> Result<f64, MetricsError> {
    gt.check_aligned(pred)?;
    if gt.is_empty() {
        return Err(MetricsError::EmptySequence);
    }
    let hits = gt.labels.iter().zip(&pred.labels).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / gt.len() as f64)
}

/// 9×9 matrix of seconds; rows are ground truth, columns prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix(pub [[f64; ActivityClass::COUNT]; ActivityClass::COUNT]);

impl ConfusionMatrix {
    pub fn cell(&self, gt: ActivityClass, pred: ActivityClass) -> f64 {
        self.0[gt.index()][pred.index()]
    }

    pub fn total(&self) -> f64 {
        self.0.iter().flatten().sum()
    }

    pub fn trace(&self) -> f64 {
        (0..ActivityClass::COUNT).map(|i| self.0[i][i]).sum()
    }

    pub fn row_sum(&self, gt: ActivityClass) -> f64 {
        self.0[gt.index()].iter().sum()
    }

    pub fn column_sum(&self, pred: ActivityClass) -> f64 {
        self.0.iter().map(|row| row[pred.index()]).sum()
    }
}

fn step_counts(gt: &LabelSequence, pred: &LabelSequence) -> [[usize; ActivityClass::COUNT]; ActivityClass::COUNT] {
    let mut counts = [[0usize; ActivityClass::COUNT]; ActivityClass::COUNT];
    for (g, p) in gt.labels.iter().zip(&pred.labels) {
        counts[g.index()][p.index()] += 1;
    }
    counts
}

pub fn confusion(gt: &LabelSequence, pred: &LabelSequence) -> Result<ConfusionMatrix, MetricsError> {
    gt.check_aligned(pred)?;
    let counts = step_counts(gt, pred);
    let mut m = [[0.0; ActivityClass::COUNT]; ActivityClass::COUNT];
    for (i, row) in counts.iter().enumerate() {
        for (j, n) in row.iter().enumerate() {
            m[i][j] = *n as f64 * gt.resolution;
        }
    }
    Ok(ConfusionMatrix(m))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support_seconds: f64,
}

fn class_scores(counts: &[[usize; ActivityClass::COUNT]; ActivityClass::COUNT], c: usize, resolution: f64) -> ClassScores {
    let tp = counts[c][c] as f64;
    let support: usize = counts[c].iter().sum();
    let predicted: usize = counts.iter().map(|row| row[c]).sum();
    let precision = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
    let recall = if support == 0 { 0.0 } else { tp / support as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ClassScores {
        precision,
        recall,
        f1,
        support_seconds: support as f64 * resolution,
    }
}

fn present(counts: &[[usize; ActivityClass::COUNT]; ActivityClass::COUNT], c: usize) -> bool {
    counts[c].iter().sum::<usize>() > 0 || counts.iter().any(|row| row[c] > 0)
}

/// Unweighted mean of per-class F1 over `classes`, skipping classes absent
/// from both sequences.
pub fn macro_f1(gt: &LabelSequence, pred: &LabelSequence, classes: &[ActivityClass]) -> Result<f64, MetricsError> {
    gt.check_aligned(pred)?;
    if classes.is_empty() {
        return Err(MetricsError::EmptyClassSet);
    }
    if gt.is_empty() {
        return Err(MetricsError::EmptySequence);
    }
    let counts = step_counts(gt, pred);
    let mut classes = classes.to_vec();
    classes.sort();
    classes.dedup();
    let f1s: Vec<f64> = classes
        .iter()
        .filter(|c| present(&counts, c.index()))
        .map(|c| class_scores(&counts, c.index(), gt.resolution).f1)
        .collect();
    if f1s.is_empty() {
        return Err(MetricsError::NoClassesPresent);
    }
    Ok(f1s.iter().sum::<f64>() / f1s.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub video_id: String,
    pub resolution: f64,
    pub horizon: f64,
    pub accuracy: f64,
    pub macro_f1: f64,
    /// Classes occurring in ground truth or prediction, keyed by class id.
    pub per_class: BTreeMap<u8, ClassScores>,
    pub confusion: ConfusionMatrix,
}

impl MetricsReport {
    /// `video_id,method,accuracy,f1` with percentages, as consumed by aggregation.
    pub fn csv_row(&self, method: &str) -> String {
        format!(
            "{},{},{:.2},{:.2}",
            self.video_id,
            method,
            self.accuracy * 100.0,
            self.macro_f1 * 100.0
        )
    }
}

/// Evaluate `pred` against `gt` over `classes` (macro-F1 class set).
///
/// The horizon defaults to the later of the two log ends.
pub fn score_logs(
    gt: &ActivityLog,
    pred: &ActivityLog,
    resolution: f64,
    horizon: Option<f64>,
    classes: &[ActivityClass],
) -> Result<MetricsReport, MetricsError> {
    let horizon = horizon.unwrap_or_else(|| gt.end().max(pred.end()));
    let g = discretize(gt, resolution, horizon)?;
    let p = discretize(pred, resolution, horizon)?;
    let counts = step_counts(&g, &p);
    let per_class = ActivityClass::ALL
        .iter()
        .filter(|c| present(&counts, c.index()))
        .map(|c| (c.id(), class_scores(&counts, c.index(), resolution)))
        .collect();
    Ok(MetricsReport {
        video_id: gt.video_id().to_string(),
        resolution,
        horizon,
        accuracy: interval_accuracy(&g, &p)?,
        macro_f1: macro_f1(&g, &p, classes)?,
        per_class,
        confusion: confusion(&g, &p)?,
    })
}
