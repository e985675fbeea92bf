use serde::{Deserialize, Serialize};

use super::keypoints::{Keypoint, KeypointSeries};
use super::FeatureError;

const FRAME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub length_s: f64,
    pub stride_s: f64,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self {
            length_s: 3.0,
            stride_s: 1.0,
        }
    }
}

impl WindowSpec {
    pub fn new(length_s: f64, stride_s: f64) -> Result<Self, FeatureError> {
        if !(length_s.is_finite() && length_s > 0.0 && stride_s.is_finite() && stride_s > 0.0) {
            return Err(FeatureError::InvalidWindowSpec { length_s, stride_s });
        }
        Ok(Self { length_s, stride_s })
    }

    /// `floor((duration − length) / stride) + 1`, or `None` when too short.
    pub fn window_count(&self, duration: f64) -> Option<usize> {
        if duration + FRAME_EPS < self.length_s {
            return None;
        }
        Some((((duration - self.length_s) / self.stride_s) + FRAME_EPS).floor() as usize + 1)
    }
}

/// Frames with `start ≤ i / fps < start + length`.
#[derive(Debug, Clone, Copy)]
pub struct Window<'a> {
    pub index: usize,
    pub start_s: f64,
    pub fps: f64,
    pub frames: &'a [Vec<Keypoint>],
}

fn first_frame_at(t: f64, fps: f64) -> usize {
    (t * fps - FRAME_EPS).ceil().max(0.0) as usize
}

pub fn make_windows(series: &KeypointSeries, spec: WindowSpec) -> Result<Vec<Window<'_>>, FeatureError> {
    let duration = series.duration();
    let count = spec.window_count(duration).ok_or(FeatureError::SeriesTooShort {
        duration,
        length_s: spec.length_s,
    })?;
    Ok((0..count)
        .map(|k| {
            let start_s = k as f64 * spec.stride_s;
            let lo = first_frame_at(start_s, series.fps).min(series.len());
            let hi = first_frame_at(start_s + spec.length_s, series.fps).min(series.len());
            Window {
                index: k,
                start_s,
                fps: series.fps,
                frames: &series.frames[lo..hi],
            }
        })
        .collect())
}
