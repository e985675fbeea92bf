use serde::{Deserialize, Serialize};

use super::{ActivityClass, ModelError, TimeStamp};

/// A labeled half-open time range `[start, stop)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityInterval {
    start: TimeStamp,
    stop: TimeStamp,
    class: ActivityClass,
    justification: Option<String>,
}

impl ActivityInterval {
    pub fn new(start: TimeStamp, stop: TimeStamp, class: ActivityClass) -> Result<Self, ModelError> {
        if start >= stop {
            return Err(ModelError::EmptyInterval {
                start: start.seconds(),
                stop: stop.seconds(),
            });
        }
        Ok(Self {
            start,
            stop,
            class,
            justification: None,
        })
    }

    /// Convenience constructor from raw seconds.
    pub fn from_seconds(start: f64, stop: f64, class: ActivityClass) -> Result<Self, ModelError> {
        Self::new(TimeStamp::from_seconds(start)?, TimeStamp::from_seconds(stop)?, class)
    }

    pub fn with_justification(mut self, text: impl Into<String>) -> Self {
        self.justification = Some(text.into());
        self
    }

    pub fn start(&self) -> TimeStamp {
        self.start
    }

    pub fn stop(&self) -> TimeStamp {
        self.stop
    }

    pub fn class(&self) -> ActivityClass {
        self.class
    }

    pub fn justification(&self) -> Option<&str> {
        self.justification.as_deref()
    }

    pub fn duration(&self) -> f64 {
        self.stop.seconds() - self.start.seconds()
    }

    pub fn contains(&self, t: f64) -> bool {
        self.start.seconds() <= t && t < self.stop.seconds()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogSource {
    GroundTruth,
    LlmPromptA,
    LlmPromptB,
    Baseline,
}

impl LogSource {
    pub fn as_str(self) -> &'static str {
        match self {
            LogSource::GroundTruth => "ground_truth",
            LogSource::LlmPromptA => "llm_prompt_a",
            LogSource::LlmPromptB => "llm_prompt_b",
            LogSource::Baseline => "baseline",
        }
    }
}

/// All intervals recognized (or annotated) for one video, sorted by start.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityLog {
    video_id: String,
    source: LogSource,
    intervals: Vec<ActivityInterval>,
}

impl ActivityLog {
    pub fn new(
        video_id: impl Into<String>,
        source: LogSource,
        intervals: Vec<ActivityInterval>,
    ) -> Result<Self, ModelError> {
        if let Some(i) = intervals.windows(2).position(|w| w[1].start < w[0].start) {
            return Err(ModelError::Unsorted { index: i + 1 });
        }
        Ok(Self {
            video_id: video_id.into(),
            source,
            intervals,
        })
    }

    /// Like [`ActivityLog::new`], additionally requiring internal continuity:
    /// each stop equals the next start. The first start is unconstrained.
    pub fn new_continuous(
        video_id: impl Into<String>,
        source: LogSource,
        intervals: Vec<ActivityInterval>,
    ) -> Result<Self, ModelError> {
        let log = Self::new(video_id, source, intervals)?;
        if let Some(index) = log.first_discontinuity() {
            return Err(ModelError::Discontinuous { index });
        }
        Ok(log)
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn source(&self) -> LogSource {
        self.source
    }

    pub fn intervals(&self) -> &[ActivityInterval] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Stop of the last interval, or zero for an empty log.
    pub fn end(&self) -> f64 {
        self.intervals
            .iter()
            .map(|i| i.stop.seconds())
            .fold(0.0, f64::max)
    }

    /// Index `k+1` of the first pair whose boundary does not meet.
    pub fn first_discontinuity(&self) -> Option<usize> {
        self.intervals
            .windows(2)
            .position(|w| !w[0].stop.approx_eq(w[1].start))
            .map(|i| i + 1)
    }

    pub fn is_continuous(&self) -> bool {
        self.first_discontinuity().is_none()
    }

    pub fn classes(&self) -> impl Iterator<Item = ActivityClass> + '_ {
        self.intervals.iter().map(|i| i.class)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&LogWire::from(self)).expect("log serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let wire: LogWire = serde_json::from_str(text).map_err(|e| ModelError::Json(e.to_string()))?;
        wire.try_into()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct IntervalWire {
    start_s: f64,
    stop_s: f64,
    class_id: u8,
    #[serde(default)]
    justification: Option<String>,
}

/// Canonical JSON shape: `{video_id, source, intervals:[{start_s, stop_s, class_id, justification}]}`.
#[derive(Debug, Serialize, Deserialize)]
struct LogWire {
    video_id: String,
    source: LogSource,
    intervals: Vec<IntervalWire>,
}

impl From<&ActivityLog> for LogWire {
    fn from(log: &ActivityLog) -> Self {
        LogWire {
            video_id: log.video_id.clone(),
            source: log.source,
            intervals: log
                .intervals
                .iter()
                .map(|i| IntervalWire {
                    start_s: i.start.seconds(),
                    stop_s: i.stop.seconds(),
                    class_id: i.class.id(),
                    justification: i.justification.clone(),
                })
                .collect(),
        }
    }
}

impl TryFrom<LogWire> for ActivityLog {
    type Error = ModelError;

    fn try_from(wire: LogWire) -> Result<Self, Self::Error> {
        let intervals = wire
            .intervals
            .into_iter()
            .map(|w| {
                let mut iv = ActivityInterval::from_seconds(
                    w.start_s,
                    w.stop_s,
                    ActivityClass::from_id(w.class_id)?,
                )?;
                iv.justification = w.justification;
                Ok(iv)
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        ActivityLog::new(wire.video_id, wire.source, intervals)
    }
}

impl Serialize for ActivityLog {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        LogWire::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ActivityLog {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let wire = LogWire::deserialize(deserializer)?;
        ActivityLog::try_from(wire).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(a: f64, b: f64, c: u8) -> ActivityInterval {
        ActivityInterval::from_seconds(a, b, ActivityClass::from_id(c).unwrap()).unwrap()
    }

    #[test]
    fn interval_requires_positive_length() {
        assert!(ActivityInterval::from_seconds(5.0, 5.0, ActivityClass::Others).is_err());
        assert!(ActivityInterval::from_seconds(6.0, 5.0, ActivityClass::Others).is_err());
    }

    #[test]
    fn unsorted_log_rejected() {
        let err = ActivityLog::new("v", LogSource::GroundTruth, vec![iv(5.0, 6.0, 0), iv(0.0, 5.0, 1)]);
        assert!(matches!(err, Err(ModelError::Unsorted { index: 1 })));
    }

    #[test]
    fn continuity_ignores_first_start() {
        let log = ActivityLog::new_continuous(
            "v",
            LogSource::GroundTruth,
            vec![iv(12.0, 20.0, 0), iv(20.0, 25.0 + 1e-10, 1), iv(25.0, 30.0, 2)],
        );
        assert!(log.is_ok());
        let gap = ActivityLog::new_continuous(
            "v",
            LogSource::GroundTruth,
            vec![iv(0.0, 20.0, 0), iv(21.0, 25.0, 1)],
        );
        assert!(matches!(gap, Err(ModelError::Discontinuous { index: 1 })));
    }

    #[test]
    fn json_shape_is_canonical() {
        let log = ActivityLog::new(
            "N03T1",
            LogSource::LlmPromptB,
            vec![iv(0.0, 41.0, 0).with_justification("supplies"), iv(41.0, 45.0, 1)],
        )
        .unwrap();
        let value: serde_json::Value = serde_json::from_str(&log.to_json()).unwrap();
        assert_eq!(value["video_id"], "N03T1");
        assert_eq!(value["source"], "llm_prompt_b");
        assert_eq!(value["intervals"][0]["start_s"], 0.0);
        assert_eq!(value["intervals"][0]["stop_s"], 41.0);
        assert_eq!(value["intervals"][1]["class_id"], 1);
        assert_eq!(value["intervals"][0]["justification"], "supplies");
        assert_eq!(ActivityLog::from_json(&log.to_json()).unwrap(), log);
    }
}
