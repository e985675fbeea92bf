//! Participant-level train/test split manifests.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use crate::config::config_error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitEntry {
    pub participant: String,
    pub session: String,
    pub split: Split,
}

/// A participant with sessions on both sides of the split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitViolation {
    pub participant: String,
    pub train_sessions: Vec<String>,
    pub test_sessions: Vec<String>,
}

impl fmt::Display for SplitViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "participant {} is in train (sessions {}) and test (sessions {})",
            self.participant,
            self.train_sessions.join(", "),
            self.test_sessions.join(", ")
        )
    }
}

/// `N03T1` → (`N03`, `T1`): a trailing `T<digits>` is the session.
pub fn split_video_id(video_id: &str) -> (String, String) {
    if let Some(i) = video_id.rfind(['T', 't']) {
        let (p, s) = video_id.split_at(i);
        if !p.is_empty() && s.len() > 1 && s[1..].chars().all(|c| c.is_ascii_digit()) {
            return (p.to_string(), s.to_string());
        }
    }
    (video_id.to_string(), String::new())
}

pub fn participant_of(video_id: &str) -> String {
    split_video_id(video_id).0
}

/// One violation per participant appearing in both splits, in id order.
pub fn check_split(entries: &[SplitEntry]) -> Vec<SplitViolation> {
    let mut sides: BTreeMap<&str, (BTreeSet<&str>, BTreeSet<&str>)> = BTreeMap::new();
    for e in entries {
        let s = sides.entry(&e.participant).or_default();
        match e.split {
            Split::Train => s.0.insert(&e.session),
            Split::Test => s.1.insert(&e.session),
        };
    }
    sides
        .into_iter()
        .filter(|(_, (tr, te))| !tr.is_empty() && !te.is_empty())
        .map(|(p, (tr, te))| SplitViolation {
            participant: p.to_string(),
            train_sessions: tr.into_iter().map(str::to_string).collect(),
            test_sessions: te.into_iter().map(str::to_string).collect(),
        })
        .collect()
}

fn parse_split(s: &str) -> anyhow::Result<Split> {
    match s.trim().to_ascii_lowercase().as_str() {
        "train" => Ok(Split::Train),
        "test" => Ok(Split::Test),
        other => Err(config_error(format!("unknown split {other:?} (train or test)"))),
    }
}

/// Read `participant,session,split` or `video_id,split` CSV.
pub fn read_manifest(path: &Path) -> anyhow::Result<Vec<SplitEntry>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading split manifest {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let split_col = col("split").ok_or_else(|| config_error(format!("{}: no `split` column", path.display())))?;
    let (participant_col, session_col, video_col) = (col("participant"), col("session"), col("video_id"));
    if participant_col.is_none() && video_col.is_none() {
        return Err(config_error(format!(
            "{}: needs a `participant` or `video_id` column",
            path.display()
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("{}: line {}", path.display(), i + 2))?;
        let field = |c: Option<usize>| c.and_then(|c| rec.get(c)).map(|s| s.trim().to_string());
        let split = parse_split(rec.get(split_col).unwrap_or_default())
            .with_context(|| format!("{}: line {}", path.display(), i + 2))?;
        let (participant, session) = match (field(participant_col), field(video_col)) {
            (Some(p), _) => (p, field(session_col).unwrap_or_default()),
            (None, Some(v)) => split_video_id(&v),
            (None, None) => unreachable!("checked above"),
        };
        out.push(SplitEntry {
            participant,
            session,
            split,
        });
    }
    Ok(out)
}

/// Manifest entries, or a configuration error listing every violation.
pub fn load_checked(path: &Path) -> anyhow::Result<Vec<SplitEntry>> {
    let entries = read_manifest(path)?;
    let violations = check_split(&entries);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(config_error(format!(
            "split manifest {} leaks participants: {}",
            path.display(),
            list.join("; ")
        )));
    }
    Ok(entries)
}

pub fn write_manifest(entries: &[SplitEntry]) -> String {
    let mut s = String::from("participant,session,split\n");
    for e in entries {
        let split = match e.split {
            Split::Train => "train",
            Split::Test => "test",
        };
        s.push_str(&format!("{},{},{split}\n", e.participant, e.session));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(p: &str, s: &str, split: Split) -> SplitEntry {
        SplitEntry {
            participant: p.into(),
            session: s.into(),
            split,
        }
    }

    #[test]
    fn video_ids_split_into_participant_and_session() {
        assert_eq!(split_video_id("N03T1"), ("N03".into(), "T1".into()));
        assert_eq!(split_video_id("S12T2"), ("S12".into(), "T2".into()));
        assert_eq!(participant_of("clipT"), "clipT");
        assert_eq!(participant_of("T1"), "T1");
    }

    #[test]
    fn split_examples() {
        assert!(check_split(&[]).is_empty());
        assert!(check_split(&[e("N01", "T1", Split::Train), e("N01", "T2", Split::Train), e("N02", "T1", Split::Test)])
            .is_empty());
        let v = check_split(&[e("N03", "T1", Split::Train), e("N03", "T2", Split::Test), e("N05", "T1", Split::Test)]);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].participant, "N03");
        assert!(v[0].to_string().contains("N03"));
    }

    #[test]
    fn manifest_round_trips() {
        let entries = vec![e("N01", "T1", Split::Train), e("S01", "T1", Split::Test)];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("split.csv");
        std::fs::write(&p, write_manifest(&entries)).unwrap();
        assert_eq!(read_manifest(&p).unwrap(), entries);
        std::fs::write(&p, "video_id,split\nN03T1,train\nN03T2,test\n").unwrap();
        let err = load_checked(&p).unwrap_err();
        assert!(err.downcast_ref::<crate::ConfigError>().is_some());
        assert!(err.to_string().contains("N03"));
    }
}
