use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::FeatureError;

/// COCO-17 joint order.
pub const COCO_JOINTS: [&str; 17] = [
    "nose",
    "left_eye",
    "right_eye",
    "left_ear",
    "right_ear",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
];

/// Detections below this confidence are treated as missing.
pub const DEFAULT_MISSING_THRESHOLD: f64 = 0.1;

/// Confidence written into interpolated samples.
pub const FILLED_CONFIDENCE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub conf: f64,
}

impl Keypoint {
    pub const MISSING: Keypoint = Keypoint {
        x: 0.0,
        y: 0.0,
        conf: 0.0,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Nurse,
    Student,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Nurse => "nurse",
            Role::Student => "student",
        }
    }

    /// Anomaly-detector label convention: nurse = 1 (inlier), student = 0.
    pub fn label(self) -> u8 {
        match self {
            Role::Nurse => 1,
            Role::Student => 0,
        }
    }
}

impl std::str::FromStr for Role {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nurse" => Ok(Role::Nurse),
            "student" => Ok(Role::Student),
            other => Err(FeatureError::InvalidSeries(format!("unknown role {other:?}"))),
        }
    }
}

/// Per-frame 2D skeletons of one practitioner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeypointSeries {
    pub video_id: String,
    pub fps: f64,
    pub role: Role,
    pub session: String,
    pub joint_count: usize,
    pub frames: Vec<Vec<Keypoint>>,
}

pub fn joint_names(count: usize) -> Vec<String> {
    if count == COCO_JOINTS.len() {
        COCO_JOINTS.iter().map(|s| s.to_string()).collect()
    } else {
        (0..count).map(|i| format!("joint{i:02}")).collect()
    }
}

impl KeypointSeries {
    pub fn new(
        video_id: impl Into<String>,
        fps: f64,
        role: Role,
        session: impl Into<String>,
        frames: Vec<Vec<Keypoint>>,
    ) -> Result<Self, FeatureError> {
        let joint_count = frames.first().map_or(COCO_JOINTS.len(), Vec::len);
        let series = Self {
            video_id: video_id.into(),
            fps,
            role,
            session: session.into(),
            joint_count,
            frames,
        };
        series.validate()?;
        Ok(series)
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(FeatureError::InvalidSeries(format!("fps must be positive, got {}", self.fps)));
        }
        for (i, frame) in self.frames.iter().enumerate() {
            if frame.len() != self.joint_count {
                return Err(FeatureError::InvalidSeries(format!(
                    "frame {i} has {} joints, expected {}",
                    frame.len(),
                    self.joint_count
                )));
            }
            for kp in frame {
                if !(kp.x.is_finite() && kp.y.is_finite() && (0.0..=1.0).contains(&kp.conf)) {
                    return Err(FeatureError::InvalidSeries(format!("frame {i} has an invalid keypoint {kp:?}")));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Frame count divided by frame rate.
    pub fn duration(&self) -> f64 {
        self.frames.len() as f64 / self.fps
    }

    pub fn joint_names(&self) -> Vec<String> {
        joint_names(self.joint_count)
    }

    /// One coordinate of one joint across all frames (`axis` 0 = x, 1 = y).
    pub fn channel(&self, joint: usize, axis: usize) -> Vec<f64> {
        self.frames
            .iter()
            .map(|f| if axis == 0 { f[joint].x } else { f[joint].y })
            .collect()
    }

    /// Read `frame,joint_id,x,y,conf` rows; absent (frame, joint) pairs are missing.
    pub fn from_csv_reader<R: Read>(
        reader: R,
        video_id: &str,
        fps: f64,
        role: Role,
        session: &str,
        joint_count: usize,
    ) -> Result<Self, FeatureError> {
        #[derive(Deserialize)]
        struct Row {
            frame: usize,
            joint_id: usize,
            x: f64,
            y: f64,
            conf: f64,
        }
        let mut rows: BTreeMap<usize, Vec<Keypoint>> = BTreeMap::new();
        let mut rdr = csv::Reader::from_reader(reader);
        for rec in rdr.deserialize::<Row>() {
            let r = rec.map_err(|e| FeatureError::Io(e.to_string()))?;
            if r.joint_id >= joint_count {
                return Err(FeatureError::InvalidSeries(format!(
                    "joint_id {} out of range for {joint_count} joints",
                    r.joint_id
                )));
            }
            let frame = rows.entry(r.frame).or_insert_with(|| vec![Keypoint::MISSING; joint_count]);
            frame[r.joint_id] = Keypoint {
                x: r.x,
                y: r.y,
                conf: r.conf,
            };
        }
        let n = rows.keys().next_back().map_or(0, |m| m + 1);
        let mut frames = vec![vec![Keypoint::MISSING; joint_count]; n];
        for (i, f) in rows {
            frames[i] = f;
        }
        let series = Self {
            video_id: video_id.to_string(),
            fps,
            role,
            session: session.to_string(),
            joint_count,
            frames,
        };
        series.validate()?;
        Ok(series)
    }

    /// Accepts either a full serialized series or a bare array of frames,
    /// each frame an array of `[x, y, conf]` triples.
    pub fn from_json_str(text: &str, video_id: &str, fps: f64, role: Role, session: &str) -> Result<Self, FeatureError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| FeatureError::Io(e.to_string()))?;
        if value.is_object() {
            let s: KeypointSeries = serde_json::from_value(value).map_err(|e| FeatureError::Io(e.to_string()))?;
            s.validate()?;
            return Ok(s);
        }
        let raw: Vec<Vec<[f64; 3]>> = serde_json::from_value(value).map_err(|e| FeatureError::Io(e.to_string()))?;
        let frames = raw
            .into_iter()
            .map(|f| f.into_iter().map(|[x, y, conf]| Keypoint { x, y, conf }).collect())
            .collect();
        Self::new(video_id, fps, role, session, frames)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("frame,joint_id,x,y,conf\n");
        for (i, frame) in self.frames.iter().enumerate() {
            for (j, kp) in frame.iter().enumerate() {
                out.push_str(&format!("{i},{j},{},{},{}\n", kp.x, kp.y, kp.conf));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InterpolationReport {
    /// Joints with no valid detection at all; zero-filled.
    pub never_detected: Vec<usize>,
    pub filled_samples: usize,
}

/// Fill missing detections per joint by linear interpolation in time;
/// leading/trailing gaps take the nearest valid value.
pub fn interpolate_missing(
    series: &KeypointSeries,
    missing_threshold: f64,
) -> Result<(KeypointSeries, InterpolationReport), FeatureError> {
    if series.is_empty() {
        return Err(FeatureError::EmptySeries);
    }
    let mut out = series.clone();
    let mut report = InterpolationReport::default();
    let n = series.len();
    for j in 0..series.joint_count {
        let valid: Vec<usize> = (0..n).filter(|&i| series.frames[i][j].conf >= missing_threshold).collect();
        if valid.is_empty() {
            report.never_detected.push(j);
            for frame in &mut out.frames {
                frame[j] = Keypoint::MISSING;
            }
            continue;
        }
        let mut next = 0;
        for i in 0..n {
            if series.frames[i][j].conf >= missing_threshold {
                continue;
            }
            while next < valid.len() && valid[next] < i {
                next += 1;
            }
            let (x, y) = match (next.checked_sub(1).map(|p| valid[p]), valid.get(next).copied()) {
                (Some(a), Some(b)) => {
                    let w = (i - a) as f64 / (b - a) as f64;
                    let (ka, kb) = (series.frames[a][j], series.frames[b][j]);
                    (ka.x + w * (kb.x - ka.x), ka.y + w * (kb.y - ka.y))
                }
                (Some(a), None) => (series.frames[a][j].x, series.frames[a][j].y),
                (None, Some(b)) => (series.frames[b][j].x, series.frames[b][j].y),
                (None, None) => unreachable!("valid is non-empty"),
            };
            out.frames[i][j] = Keypoint {
                x,
                y,
                conf: FILLED_CONFIDENCE,
            };
            report.filled_samples += 1;
        }
    }
    Ok((out, report))
}
