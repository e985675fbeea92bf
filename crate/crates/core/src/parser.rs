//! Parsing of LLM recognition output into [`ActivityLog`]s.
//!
//! Two line formats are understood:
//!
//! * format A: `start_seconds, (start_mm:ss), stop_seconds, (stop_mm:ss), class_name, class_id`
//! * format B: `[start (m:ss)] - [stop (m:ss)]: Class Name - Justification: text`
//!
//! The `mm:ss` field is authoritative. When the raw seconds disagree with it
//! by more than [`TIMESTAMP_TOLERANCE_S`], the seconds are replaced and the
//! repair is recorded. Lines that do not parse are dropped and reported,
//! which lets preamble and epilogue prose pass through harmlessly.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::model::{
    mmss_to_seconds, ActivityClass, ActivityInterval, ActivityLog, ClassNames, LogSource, ModelError,
    TimeStamp, CONTINUITY_TOLERANCE_S,
};

/// Maximum disagreement between the seconds and `mm:ss` fields still considered consistent.
pub const TIMESTAMP_TOLERANCE_S: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("malformed line: {0}")]
    MalformedLine(String),
    #[error("class name {name:?} disagrees with class id {id}")]
    ClassMismatch { name: String, id: String },
    #[error("unknown activity class name {0:?}")]
    UnknownClassName(String),
    #[error("gap before line {line_no} (start {start} s, previous stop {previous_stop} s)")]
    DiscontinuousLog {
        line_no: usize,
        start: f64,
        previous_stop: f64,
    },
    #[error("no parseable lines")]
    EmptyLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogFormat {
    A,
    B,
}

impl LogFormat {
    pub fn source(self) -> LogSource {
        match self {
            LogFormat::A => LogSource::LlmPromptA,
            LogFormat::B => LogSource::LlmPromptB,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Continuity {
    /// Any gap is an error.
    Require,
    /// Gaps are closed by extending the earlier interval.
    Stitch,
    AllowGaps,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairRule {
    /// Raw seconds disagreed with the authoritative `mm:ss` field.
    MmssOverridesSeconds,
    /// Class name was unrecognized; the class id was used.
    ClassIdOverName,
    /// Class id was invalid; the class name was used.
    ClassNameOverId,
    /// Gap closed by extending the earlier stop to the later start.
    StitchGap,
    /// Overlap truncated at its midpoint.
    OverlapMidpoint,
    /// Line moved to restore start ordering.
    ReorderByStart,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Repair {
    pub line_no: usize,
    pub field: String,
    pub raw_value: String,
    pub repaired_value: String,
    pub rule: RepairRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedLine {
    pub line_no: usize,
    pub reason: String,
}

/// Result of parsing one line: the interval plus any field repairs applied to it.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedLine {
    pub interval: ActivityInterval,
    pub repairs: Vec<LineRepair>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineRepair {
    pub field: &'static str,
    pub raw_value: String,
    pub repaired_value: String,
    pub rule: RepairRule,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParseReport {
    pub log: ActivityLog,
    pub repairs: Vec<Repair>,
    pub dropped_lines: Vec<DroppedLine>,
}

impl ParseReport {
    /// The repairs sidecar document (everything except the log itself).
    pub fn sidecar_json(&self) -> String {
        #[derive(Serialize)]
        struct Sidecar<'a> {
            video_id: &'a str,
            repairs: &'a [Repair],
            dropped_lines: &'a [DroppedLine],
        }
        serde_json::to_string_pretty(&Sidecar {
            video_id: self.log.video_id(),
            repairs: &self.repairs,
            dropped_lines: &self.dropped_lines,
        })
        .expect("sidecar serializes")
    }
}

#[derive(Debug, Clone)]
pub struct ParseOptions {
    pub video_id: String,
    pub format: LogFormat,
    pub continuity: Continuity,
}

impl ParseOptions {
    pub fn new(video_id: impl Into<String>, format: LogFormat, continuity: Continuity) -> Self {
        Self {
            video_id: video_id.into(),
            format,
            continuity,
        }
    }
}

/// Returns the `mm:ss` value when the raw seconds disagree with it by more than
/// the tolerance (or are not a valid timestamp); otherwise keeps the raw seconds.
pub fn repair_timestamp(seconds_field: f64, mmss_field: TimeStamp) -> (TimeStamp, bool) {
    match TimeStamp::from_seconds(seconds_field) {
        Ok(raw) if (seconds_field - mmss_field.seconds()).abs() <= TIMESTAMP_TOLERANCE_S => (raw, false),
        _ => (mmss_field, true),
    }
}

/// Line parser bound to a class-name table.
#[derive(Debug, Clone, Copy)]
pub struct LineParser<'a> {
    names: &'a ClassNames,
}

impl Default for LineParser<'static> {
    fn default() -> Self {
        Self {
            names: ClassNames::builtin(),
        }
    }
}

impl<'a> LineParser<'a> {
    pub fn new(names: &'a ClassNames) -> Self {
        Self { names }
    }

    pub fn parse_line_a(&self, text: &str) -> Result<ParsedLine, ParseError> {
        let body = strip_list_marker(text);
        let fields: Vec<&str> = body.split(',').map(str::trim).collect();
        if fields.len() != 6 {
            return Err(ParseError::MalformedLine(format!(
                "expected 6 comma-separated fields, found {}",
                fields.len()
            )));
        }
        let mut repairs = Vec::new();
        let start = timestamp_pair(fields[0], fields[1], "start_s", &mut repairs)?;
        let stop = timestamp_pair(fields[2], fields[3], "stop_s", &mut repairs)?;
        let class = self.resolve_class(fields[4], fields[5], &mut repairs)?;
        let interval = ActivityInterval::new(start, stop, class).map_err(model_to_line_error)?;
        Ok(ParsedLine { interval, repairs })
    }

    pub fn parse_line_b(&self, text: &str) -> Result<ParsedLine, ParseError> {
        let body = strip_list_marker(text);
        let caps = line_b_regex()
            .captures(body)
            .ok_or_else(|| ParseError::MalformedLine("does not match `[s (m:ss)] - [e (m:ss)]: class`".into()))?;
        let mut repairs = Vec::new();
        let start = timestamp_pair(&caps[1], &caps[2], "start_s", &mut repairs)?;
        let stop = timestamp_pair(&caps[3], &caps[4], "stop_s", &mut repairs)?;
        let name = caps[5].trim().trim_end_matches('-').trim();
        let class = self.names.resolve(name).map_err(|_| ParseError::UnknownClassName(name.to_string()))?;
        let mut interval = ActivityInterval::new(start, stop, class).map_err(model_to_line_error)?;
        if let Some(j) = caps.get(6) {
            interval = interval.with_justification(j.as_str().trim());
        }
        Ok(ParsedLine { interval, repairs })
    }

    pub fn parse_line(&self, format: LogFormat, text: &str) -> Result<ParsedLine, ParseError> {
        match format {
            LogFormat::A => self.parse_line_a(text),
            LogFormat::B => self.parse_line_b(text),
        }
    }

    fn resolve_class(
        &self,
        name: &str,
        id: &str,
        repairs: &mut Vec<LineRepair>,
    ) -> Result<ActivityClass, ParseError> {
        let by_id = id
            .trim_end_matches('.')
            .parse::<u8>()
            .ok()
            .and_then(|i| ActivityClass::from_id(i).ok());
        let by_name = self.names.resolve(name).ok();
        match (by_id, by_name) {
            (Some(a), Some(b)) if a == b => Ok(a),
            (Some(a), None) => {
                repairs.push(LineRepair {
                    field: "class_name",
                    raw_value: name.to_string(),
                    repaired_value: a.name().to_string(),
                    rule: RepairRule::ClassIdOverName,
                });
                Ok(a)
            }
            (None, Some(b)) => {
                repairs.push(LineRepair {
                    field: "class_id",
                    raw_value: id.to_string(),
                    repaired_value: b.id().to_string(),
                    rule: RepairRule::ClassNameOverId,
                });
                Ok(b)
            }
            _ => Err(ParseError::ClassMismatch {
                name: name.to_string(),
                id: id.to_string(),
            }),
        }
    }

    pub fn parse_log(&self, text: &str, options: &ParseOptions) -> Result<ParseReport, ParseError> {
        let mut entries: Vec<Entry> = Vec::new();
        let mut repairs = Vec::new();
        let mut dropped_lines = Vec::new();

        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            match self.parse_line(options.format, line) {
                Ok(parsed) => {
                    repairs.extend(parsed.repairs.into_iter().map(|r| Repair {
                        line_no,
                        field: r.field.to_string(),
                        raw_value: r.raw_value,
                        repaired_value: r.repaired_value,
                        rule: r.rule,
                    }));
                    let iv = parsed.interval;
                    entries.push(Entry {
                        line_no,
                        start: iv.start().seconds(),
                        stop: iv.stop().seconds(),
                        class: iv.class(),
                        justification: iv.justification().map(str::to_string),
                    });
                }
                Err(e) => dropped_lines.push(DroppedLine {
                    line_no,
                    reason: e.to_string(),
                }),
            }
        }
        if entries.is_empty() {
            return Err(ParseError::EmptyLog);
        }

        reorder(&mut entries, &mut repairs);
        let entries = resolve_overlaps(entries, &mut repairs, &mut dropped_lines);
        let entries = close_gaps(entries, options.continuity, &mut repairs)?;

        let intervals = entries
            .into_iter()
            .map(|e| {
                let iv = ActivityInterval::from_seconds(e.start, e.stop, e.class).expect("non-empty after repair");
                match e.justification {
                    Some(j) => iv.with_justification(j),
                    None => iv,
                }
            })
            .collect();
        let log = ActivityLog::new(options.video_id.clone(), options.format.source(), intervals)
            .expect("sorted after repair");
        Ok(ParseReport {
            log,
            repairs,
            dropped_lines,
        })
    }
}

#[derive(Debug, Clone)]
struct Entry {
    line_no: usize,
    start: f64,
    stop: f64,
    class: ActivityClass,
    justification: Option<String>,
}

fn reorder(entries: &mut [Entry], repairs: &mut Vec<Repair>) {
    let before: Vec<usize> = entries.iter().map(|e| e.line_no).collect();
    entries.sort_by(|a, b| a.start.total_cmp(&b.start));
    for (pos, e) in entries.iter().enumerate() {
        let old = before.iter().position(|l| *l == e.line_no).unwrap();
        if old != pos {
            repairs.push(Repair {
                line_no: e.line_no,
                field: "position".into(),
                raw_value: old.to_string(),
                repaired_value: pos.to_string(),
                rule: RepairRule::ReorderByStart,
            });
        }
    }
}

fn resolve_overlaps(entries: Vec<Entry>, repairs: &mut Vec<Repair>, dropped: &mut Vec<DroppedLine>) -> Vec<Entry> {
    let mut out: Vec<Entry> = Vec::with_capacity(entries.len());
    for mut cur in entries {
        if let Some(prev) = out.last_mut() {
            if prev.stop > cur.start + CONTINUITY_TOLERANCE_S {
                let lo = prev.start.max(cur.start);
                let hi = prev.stop.min(cur.stop);
                if hi - lo <= CONTINUITY_TOLERANCE_S {
                    dropped.push(DroppedLine {
                        line_no: cur.line_no,
                        reason: format!("interval consumed by overlap with line {}", prev.line_no),
                    });
                    continue;
                }
                let mid = 0.5 * (lo + hi);
                repairs.push(Repair {
                    line_no: prev.line_no,
                    field: "stop_s".into(),
                    raw_value: prev.stop.to_string(),
                    repaired_value: mid.to_string(),
                    rule: RepairRule::OverlapMidpoint,
                });
                repairs.push(Repair {
                    line_no: cur.line_no,
                    field: "start_s".into(),
                    raw_value: cur.start.to_string(),
                    repaired_value: mid.to_string(),
                    rule: RepairRule::OverlapMidpoint,
                });
                prev.stop = mid;
                cur.start = mid;
            }
        }
        out.push(cur);
    }
    out
}

fn close_gaps(
    mut entries: Vec<Entry>,
    continuity: Continuity,
    repairs: &mut Vec<Repair>,
) -> Result<Vec<Entry>, ParseError> {
    for k in 1..entries.len() {
        let (head, tail) = entries.split_at_mut(k);
        let prev = &mut head[k - 1];
        let cur = &tail[0];
        if cur.start - prev.stop <= CONTINUITY_TOLERANCE_S {
            continue;
        }
        match continuity {
            Continuity::Require => {
                return Err(ParseError::DiscontinuousLog {
                    line_no: cur.line_no,
                    start: cur.start,
                    previous_stop: prev.stop,
                })
            }
            Continuity::Stitch => {
                repairs.push(Repair {
                    line_no: prev.line_no,
                    field: "stop_s".into(),
                    raw_value: prev.stop.to_string(),
                    repaired_value: cur.start.to_string(),
                    rule: RepairRule::StitchGap,
                });
                prev.stop = cur.start;
            }
            Continuity::AllowGaps => {}
        }
    }
    Ok(entries)
}

fn timestamp_pair(
    seconds: &str,
    mmss: &str,
    field: &'static str,
    repairs: &mut Vec<LineRepair>,
) -> Result<TimeStamp, ParseError> {
    let seconds_text = seconds.trim();
    let raw: f64 = seconds_text
        .parse()
        .map_err(|_| ParseError::MalformedLine(format!("{field}: bad seconds value {seconds_text:?}")))?;
    let mmss_text = mmss.trim().trim_start_matches('(').trim_end_matches(')').trim();
    let mmss_value = mmss_to_seconds(mmss_text).map_err(|e| ParseError::MalformedLine(format!("{field}: {e}")))?;
    let (value, repaired) = repair_timestamp(raw, mmss_value);
    if repaired {
        repairs.push(LineRepair {
            field,
            raw_value: seconds_text.to_string(),
            repaired_value: value.to_string(),
            rule: RepairRule::MmssOverridesSeconds,
        });
    }
    Ok(value)
}

fn model_to_line_error(e: ModelError) -> ParseError {
    match e {
        ModelError::UnknownClassName(n) => ParseError::UnknownClassName(n),
        other => ParseError::MalformedLine(other.to_string()),
    }
}

fn strip_list_marker(text: &str) -> &str {
    let t = text.trim();
    let t = t
        .strip_prefix("- ")
        .or_else(|| t.strip_prefix("* "))
        .or_else(|| t.strip_prefix("• "))
        .unwrap_or(t);
    // "12. " style enumeration
    if let Some(dot) = t.find(". ") {
        if dot > 0 && t[..dot].bytes().all(|b| b.is_ascii_digit()) {
            return t[dot + 2..].trim_start();
        }
    }
    t.trim()
}

fn line_b_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?i)^\[\s*([0-9]+(?:\.[0-9]+)?)\s*\(\s*([0-9]+:[0-9]+)\s*\)\s*\]\s*-\s*\[\s*([0-9]+(?:\.[0-9]+)?)\s*\(\s*([0-9]+:[0-9]+)\s*\)\s*\]\s*:\s*(.+?)\s*(?:-\s*justification\s*:\s*(.*))?$",
        )
        .expect("valid regex")
    })
}

/// Render an interval as a format-A line.
pub fn render_line_a(interval: &ActivityInterval) -> String {
    format!(
        "{}, ({}), {}, ({}), {}, {}",
        interval.start(),
        interval.start().to_mmss(),
        interval.stop(),
        interval.stop().to_mmss(),
        interval.class().name(),
        interval.class().id()
    )
}

/// Render an interval as a format-B line.
pub fn render_line_b(interval: &ActivityInterval) -> String {
    let head = format!(
        "[{} ({})] - [{} ({})]: {}",
        interval.start(),
        interval.start().to_mmss(),
        interval.stop(),
        interval.stop().to_mmss(),
        interval.class().name(),
    );
    match interval.justification() {
        Some(j) => format!("{head} - Justification: {j}"),
        None => head,
    }
}

pub fn render_log(log: &ActivityLog, format: LogFormat) -> String {
    let render = match format {
        LogFormat::A => render_line_a,
        LogFormat::B => render_line_b,
    };
    let mut out: String = log.intervals().iter().map(|i| render(i) + "\n").collect();
    if out.is_empty() {
        out.push('\n');
    }
    out
}

pub fn parse_line_a(text: &str) -> Result<ParsedLine, ParseError> {
    LineParser::default().parse_line_a(text)
}

pub fn parse_line_b(text: &str) -> Result<ParsedLine, ParseError> {
    LineParser::default().parse_line_b(text)
}

pub fn parse_log(text: &str, options: &ParseOptions) -> Result<ParseReport, ParseError> {
    LineParser::default().parse_log(text, options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn secs(t: TimeStamp) -> f64 {
        t.seconds()
    }

    #[test]
    fn line_a_direct() {
        let p = parse_line_a("83, (1:23), 95, (1:35), Suctioning phlegm, 2").unwrap();
        assert_eq!(secs(p.interval.start()), 83.0);
        assert_eq!(secs(p.interval.stop()), 95.0);
        assert_eq!(p.interval.class().id(), 2);
        assert!(p.repairs.is_empty());
    }

    #[test]
    fn line_a_repairs_hallucinated_seconds() {
        let p = parse_line_a("123, (1:23), 95, (1:35), Suctioning phlegm, 2").unwrap();
        assert_eq!(secs(p.interval.start()), 83.0);
        assert_eq!(p.repairs.len(), 1);
        assert_eq!(p.repairs[0].rule, RepairRule::MmssOverridesSeconds);
        assert_eq!(p.repairs[0].raw_value, "123");
        assert_eq!(p.repairs[0].field, "start_s");
    }

    #[test]
    fn line_a_arity() {
        assert!(matches!(
            parse_line_a("83, (1:23), Suctioning phlegm, 2"),
            Err(ParseError::MalformedLine(_))
        ));
    }

    #[test]
    fn line_a_class_cross_check() {
        assert!(matches!(
            parse_line_a("83, (1:23), 95, (1:35), Auscultation, 2"),
            Err(ParseError::ClassMismatch { .. })
        ));
        let by_id = parse_line_a("83, (1:23), 95, (1:35), Suction the phlegm, 2").unwrap();
        assert_eq!(by_id.interval.class().id(), 2);
        assert_eq!(by_id.repairs[0].rule, RepairRule::ClassIdOverName);
        let by_name = parse_line_a("83, (1:23), 95, (1:35), Phlegm suctioning, 12").unwrap();
        assert_eq!(by_name.interval.class().id(), 2);
        assert_eq!(by_name.repairs[0].rule, RepairRule::ClassNameOverId);
    }

    #[test]
    fn line_a_with_bullet_and_prompt_spelling() {
        let p = parse_line_a("- 41, (0:41), 45, (0:45), Temporal removal of the airway, 1").unwrap();
        assert_eq!(p.interval.class().id(), 1);
    }

    #[test]
    fn line_b_examples() {
        let p = parse_line_b(
            "[41 (0:41)] - [45 (0:45)]: Temporal removal of an artificial airway - Justification: hands at the mannequin's head",
        )
        .unwrap();
        assert_eq!(secs(p.interval.start()), 41.0);
        assert_eq!(secs(p.interval.stop()), 45.0);
        assert_eq!(p.interval.class().id(), 1);
        assert_eq!(p.interval.justification(), Some("hands at the mannequin's head"));

        let p = parse_line_b("[0 (0:00)] - [5 (0:05)]: Others - Justification: idle").unwrap();
        assert_eq!(p.interval.class().id(), 8);
        assert_eq!(secs(p.interval.stop()), 5.0);

        assert!(matches!(
            parse_line_b("[5 (0:05)] - [5 (0:05)]: Others - Justification: x"),
            Err(ParseError::MalformedLine(_))
        ));
        assert!(matches!(
            parse_line_b("[0 (0:00)] - [5 (0:05)]: Suctioning - Justification: x"),
            Err(ParseError::UnknownClassName(_))
        ));
        assert!(matches!(parse_line_b("Here is the log:"), Err(ParseError::MalformedLine(_))));
    }

    #[test]
    fn line_b_repairs_and_hyphenated_justification() {
        let p = parse_line_b("[123 (1:23)] - [130 (2:10)]: Auscultation - Justification: stethoscope - chest").unwrap();
        assert_eq!(secs(p.interval.start()), 83.0);
        assert_eq!(p.interval.justification(), Some("stethoscope - chest"));
        assert_eq!(p.repairs.len(), 1);
    }

    #[test]
    fn repair_timestamp_examples() {
        let ts = |s| TimeStamp::from_seconds(s).unwrap();
        assert_eq!(repair_timestamp(123.0, ts(83.0)), (ts(83.0), true));
        assert_eq!(repair_timestamp(83.0, ts(83.0)), (ts(83.0), false));
        assert_eq!(repair_timestamp(83.2, ts(83.0)), (ts(83.2), false));
        assert_eq!(repair_timestamp(83.5, ts(83.0)), (ts(83.5), false));
        assert_eq!(repair_timestamp(-1.0, ts(0.0)), (ts(0.0), true));
    }

    fn opts(c: Continuity) -> ParseOptions {
        ParseOptions::new("v", LogFormat::A, c)
    }

    #[test]
    fn parse_log_continuity_modes() {
        let ok = "0, (0:00), 41, (0:41), Catheter preparation, 0\n41, (0:41), 45, (0:45), Temporal removal of the airway, 1\n";
        let r = parse_log(ok, &opts(Continuity::Require)).unwrap();
        assert_eq!(r.log.len(), 2);
        assert!(r.repairs.is_empty());

        let gap = "0, (0:00), 40, (0:40), Catheter preparation, 0\n41, (0:41), 45, (0:45), Temporal removal of the airway, 1\n";
        let r = parse_log(gap, &opts(Continuity::Stitch)).unwrap();
        assert_eq!(secs(r.log.intervals()[0].stop()), 41.0);
        assert_eq!(r.repairs.len(), 1);
        assert_eq!(r.repairs[0].rule, RepairRule::StitchGap);
        assert!(r.log.is_continuous());

        assert!(matches!(
            parse_log(gap, &opts(Continuity::Require)),
            Err(ParseError::DiscontinuousLog { line_no: 2, .. })
        ));
        let r = parse_log(gap, &opts(Continuity::AllowGaps)).unwrap();
        assert!(!r.log.is_continuous());
        assert!(r.repairs.is_empty());
    }

    #[test]
    fn parse_log_drops_prose_and_reports() {
        let text = "Here is the log you asked for:\n\nstart_seconds, (start_mm:ss), stop_seconds, (stop_mm:ss), class_name, class_id\n0, (0:00), 10, (0:10), Others, 8\nHope this helps.";
        let r = parse_log(text, &opts(Continuity::Require)).unwrap();
        assert_eq!(r.log.len(), 1);
        let dropped: Vec<_> = r.dropped_lines.iter().map(|d| d.line_no).collect();
        assert_eq!(dropped, vec![1, 3, 5]);
        assert!(matches!(parse_log("nothing useful", &opts(Continuity::Require)), Err(ParseError::EmptyLog)));
    }

    #[test]
    fn overlap_truncated_at_midpoint() {
        let text = "0, (0:00), 12, (0:12), Catheter preparation, 0\n10, (0:10), 20, (0:20), Temporal removal of the airway, 1\n";
        let r = parse_log(text, &opts(Continuity::Require)).unwrap();
        assert_eq!(secs(r.log.intervals()[0].stop()), 11.0);
        assert_eq!(secs(r.log.intervals()[1].start()), 11.0);
        assert_eq!(r.repairs.iter().filter(|x| x.rule == RepairRule::OverlapMidpoint).count(), 2);
    }

    #[test]
    fn nested_overlap_keeps_order() {
        let text = "0, (0:00), 10, (0:10), Catheter preparation, 0\n2, (0:02), 4, (0:04), Temporal removal of the airway, 1\n";
        let r = parse_log(text, &opts(Continuity::Stitch)).unwrap();
        let iv = r.log.intervals();
        assert_eq!((secs(iv[0].start()), secs(iv[0].stop())), (0.0, 3.0));
        assert_eq!((secs(iv[1].start()), secs(iv[1].stop())), (3.0, 4.0));
    }

    #[test]
    fn out_of_order_lines_sorted_with_repair() {
        let text = "10, (0:10), 20, (0:20), Temporal removal of the airway, 1\n0, (0:00), 10, (0:10), Catheter preparation, 0\n";
        let r = parse_log(text, &opts(Continuity::Require)).unwrap();
        assert_eq!(r.log.intervals()[0].class().id(), 0);
        assert_eq!(r.repairs.iter().filter(|x| x.rule == RepairRule::ReorderByStart).count(), 2);
    }

    #[test]
    fn sidecar_lists_repairs() {
        let text = "0, (0:00), 83, (1:23), Catheter preparation, 0\n123, (1:23), 95, (1:35), Suctioning phlegm, 2\n";
        let r = parse_log(text, &opts(Continuity::Require)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.sidecar_json()).unwrap();
        assert_eq!(v["repairs"][0]["rule"], "mmss_overrides_seconds");
        assert_eq!(v["repairs"][0]["line_no"], 2);
    }

    fn arb_log() -> impl Strategy<Value = ActivityLog> {
        (0u32..30, proptest::collection::vec((1u32..120, 0u8..9), 1..20)).prop_map(|(first, parts)| {
            let mut t = first as f64;
            let intervals = parts
                .into_iter()
                .map(|(len, c)| {
                    let iv = ActivityInterval::from_seconds(t, t + len as f64, ActivityClass::from_id(c).unwrap())
                        .unwrap()
                        .with_justification(format!("cue {c}"));
                    t += len as f64;
                    iv
                })
                .collect();
            ActivityLog::new("v", LogSource::LlmPromptB, intervals).unwrap()
        })
    }

    proptest! {
        #[test]
        fn render_then_parse_line_a_is_identity(start in 0.0f64..3600.0, len in 0.01f64..600.0, c in 0u8..9) {
            let iv = ActivityInterval::from_seconds(start, start + len, ActivityClass::from_id(c).unwrap()).unwrap();
            let back = parse_line_a(&render_line_a(&iv)).unwrap();
            prop_assert!(back.repairs.is_empty());
            prop_assert_eq!(back.interval, iv);
        }

        #[test]
        fn rendered_log_round_trips(log in arb_log()) {
            let text = render_log(&log, LogFormat::B);
            let report = parse_log(&text, &ParseOptions::new("v", LogFormat::B, Continuity::Require)).unwrap();
            prop_assert!(report.repairs.is_empty());
            prop_assert_eq!(&report.log, &log);
            let json = report.log.to_json();
            prop_assert_eq!(ActivityLog::from_json(&json).unwrap(), log);
        }

        #[test]
        fn repaired_logs_are_sorted_and_stitched(
            rows in proptest::collection::vec((0u32..400, 1u32..60, 0u8..9), 1..25)
        ) {
            let text: String = rows.iter().map(|(s, len, c)| {
                let iv = ActivityInterval::from_seconds(*s as f64, (*s + *len) as f64, ActivityClass::from_id(*c).unwrap()).unwrap();
                render_line_a(&iv) + "\n"
            }).collect();
            let report = parse_log(&text, &opts(Continuity::Stitch)).unwrap();
            let iv = report.log.intervals();
            prop_assert!(iv.windows(2).all(|w| w[0].start() <= w[1].start()));
            prop_assert!(report.log.is_continuous());
        }
    }
}
