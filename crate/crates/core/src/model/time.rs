use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Tolerance used when comparing interval boundaries.
pub const CONTINUITY_TOLERANCE_S: f64 = 1e-9;

/// A non-negative, finite position in a video, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct TimeStamp(f64);

impl TimeStamp {
    pub const ZERO: TimeStamp = TimeStamp(0.0);

    pub fn from_seconds(seconds: f64) -> Result<Self, ModelError> {
        if seconds.is_finite() && seconds >= 0.0 {
            Ok(Self(seconds))
        } else {
            Err(ModelError::InvalidTimeStamp(seconds))
        }
    }

    pub fn seconds(self) -> f64 {
        self.0
    }

    /// `m:ss`, rounded to the nearest whole second.
    pub fn to_mmss(self) -> String {
        let total = self.0.round() as u64;
        format!("{}:{:02}", total / 60, total % 60)
    }

    pub fn approx_eq(self, other: TimeStamp) -> bool {
        (self.0 - other.0).abs() <= CONTINUITY_TOLERANCE_S
    }
}

impl TryFrom<f64> for TimeStamp {
    type Error = ModelError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        TimeStamp::from_seconds(value)
    }
}

impl From<TimeStamp> for f64 {
    fn from(t: TimeStamp) -> f64 {
        t.0
    }
}

impl fmt::Display for TimeStamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for TimeStamp {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        mmss_to_seconds(s)
    }
}

/// Parse `m+:ss` (seconds zero-padded, 00..59) into a timestamp.
pub fn mmss_to_seconds(text: &str) -> Result<TimeStamp, ModelError> {
    let malformed = || ModelError::MalformedTimestamp(text.to_string());
    let t = text.trim();
    let (minutes, seconds) = t.split_once(':').ok_or_else(malformed)?;
    if minutes.is_empty() || !minutes.bytes().all(|b| b.is_ascii_digit()) {
        return Err(malformed());
    }
    if seconds.len() != 2 || !seconds.bytes().all(|b| b.is_ascii_digit()) {
        return Err(malformed());
    }
    let mm: u64 = minutes.parse().map_err(|_| malformed())?;
    let ss: u64 = seconds.parse().map_err(|_| malformed())?;
    if ss > 59 {
        return Err(malformed());
    }
    Ok(TimeStamp((mm * 60 + ss) as f64))
}
