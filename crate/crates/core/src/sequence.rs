//! Validation of activity logs against the procedure grammar.
//!
//! A log is first split into rounds, each opened by catheter preparation,
//! then every round is checked for ordering, completeness and the cleanup
//! and post-procedure rules. Violations are collected, never short-circuited.

use serde::{Deserialize, Serialize};

use crate::model::{ActivityClass, ActivityLog, Phase, ProcedureModel};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SequenceError {
    #[error("no catheter-preparation interval found; cannot segment rounds")]
    NoRoundsFound,
}

/// Half-open interval index range `[start_index, stop_index)` of one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRange {
    pub start_index: usize,
    pub stop_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    OrderInversion,
    MissingStep,
    PositioningBeforeCleanup,
    AuscultationNotLast,
    DisinfectionRecurrence,
    MissingRound,
    RoundCountMismatch,
}

impl ViolationKind {
    pub fn severity(self) -> Severity {
        match self {
            // clean-up vs post-procedure confusion is the common, soft failure
            ViolationKind::PositioningBeforeCleanup => Severity::Warning,
            _ => Severity::Error,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub severity: Severity,
    /// Offending interval, when the violation is tied to one.
    pub interval_index: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub video_id: String,
    pub rounds: Vec<RoundRange>,
    pub violations: Vec<Violation>,
    pub ok: bool,
}

impl ValidationReport {
    pub fn kinds(&self) -> Vec<ViolationKind> {
        let mut k: Vec<_> = self.violations.iter().map(|v| v.kind).collect();
        k.sort();
        k.dedup();
        k
    }

    pub fn has_errors(&self) -> bool {
        self.violations.iter().any(|v| v.severity == Severity::Error)
    }
}

fn opens_new_round(model: &ProcedureModel, previous: ActivityClass) -> bool {
    previous.is_filler()
        || previous == model.terminal_class()
        || matches!(model.phase_of(previous), Some(Phase::Cleanup | Phase::PostProcedure))
}

/// Split a sorted log into procedure rounds.
///
/// A round opens at a catheter-preparation interval that follows auscultation,
/// filler, or any cleanup/post-procedure activity. Filler inside a round
/// belongs to it; leading and trailing filler belongs to no round.
pub fn segment_rounds(log: &ActivityLog, model: &ProcedureModel) -> Result<Vec<RoundRange>, SequenceError> {
    let classes: Vec<ActivityClass> = log.classes().collect();
    let opener = model.opening_class();
    let mut starts = Vec::new();
    for (i, &c) in classes.iter().enumerate() {
        if c != opener {
            continue;
        }
        if starts.is_empty() || (i > 0 && opens_new_round(model, classes[i - 1])) {
            starts.push(i);
        }
    }
    if starts.is_empty() {
        return Err(SequenceError::NoRoundsFound);
    }
    let mut rounds = Vec::with_capacity(starts.len());
    for (k, &start) in starts.iter().enumerate() {
        let limit = starts.get(k + 1).copied().unwrap_or(classes.len());
        let last_clinical = (start..limit).rev().find(|&i| !classes[i].is_filler()).unwrap_or(start);
        rounds.push(RoundRange {
            start_index: start,
            stop_index: last_clinical + 1,
        });
    }
    Ok(rounds)
}

fn violation(kind: ViolationKind, interval_index: Option<usize>, message: String) -> Violation {
    Violation {
        kind,
        severity: kind.severity(),
        interval_index,
        message,
    }
}

fn check_round(
    classes: &[ActivityClass],
    range: RoundRange,
    round_no: usize,
    model: &ProcedureModel,
    out: &mut Vec<Violation>,
) {
    use ActivityClass::{Auscultation, CatheterDisinfection, GloveDisposal, Positioning};

    let mut seen = [false; ActivityClass::COUNT];
    let mut previous: Option<ActivityClass> = None;
    let mut disinfections_after_gloves = 0usize;

    for (idx, &c) in classes.iter().enumerate().take(range.stop_index).skip(range.start_index) {
        if c.is_filler() {
            continue;
        }
        let is_cleanup = model.phase_of(c) == Some(Phase::Cleanup);

        if c != Auscultation && seen[Auscultation.index()] {
            out.push(violation(
                ViolationKind::AuscultationNotLast,
                Some(idx),
                format!("round {round_no}: {} after auscultation", c.name()),
            ));
        }
        if is_cleanup && seen[Positioning.index()] {
            out.push(violation(
                ViolationKind::PositioningBeforeCleanup,
                Some(idx),
                format!("round {round_no}: {} after positioning", c.name()),
            ));
        }
        if let Some(rank) = model.order_rank(c) {
            let latest = ActivityClass::ALL
                .iter()
                .filter(|p| seen[p.index()] && **p != Auscultation && !(is_cleanup && **p == Positioning))
                .filter_map(|p| model.order_rank(*p).map(|r| (r, *p)))
                .max();
            if let Some((max_rank, culprit)) = latest {
                if rank < max_rank {
                    out.push(violation(
                        ViolationKind::OrderInversion,
                        Some(idx),
                        format!("round {round_no}: {} after {}", c.name(), culprit.name()),
                    ));
                }
            }
        }

        if c == CatheterDisinfection && seen[GloveDisposal.index()] && previous != Some(CatheterDisinfection) {
            disinfections_after_gloves += 1;
            if disinfections_after_gloves > 1 {
                out.push(violation(
                    ViolationKind::DisinfectionRecurrence,
                    Some(idx),
                    format!("round {round_no}: catheter disinfection recurs more than once after discarding gloves"),
                ));
            }
        }

        seen[c.index()] = true;
        previous = Some(c);
    }

    for required in model.required_classes() {
        if !seen[required.index()] {
            out.push(violation(
                ViolationKind::MissingStep,
                None,
                format!("round {round_no}: missing {}", required.name()),
            ));
        }
    }
}

/// Check a log against the procedure grammar. Never fails; problems are reported as violations.
pub fn validate(log: &ActivityLog, model: &ProcedureModel) -> ValidationReport {
    let classes: Vec<ActivityClass> = log.classes().collect();
    let mut violations = Vec::new();
    let rounds = segment_rounds(log, model).unwrap_or_default();

    let first_round = rounds.first().map_or(classes.len(), |r| r.start_index);
    for (idx, c) in classes.iter().enumerate().take(first_round) {
        if !c.is_filler() {
            violations.push(violation(
                ViolationKind::OrderInversion,
                Some(idx),
                format!("{} before the first catheter preparation", c.name()),
            ));
        }
    }

    for (k, range) in rounds.iter().enumerate() {
        check_round(&classes, *range, k + 1, model, &mut violations);
        // clinical activity between rounds that the segmentation left outside
        let next = rounds.get(k + 1).map_or(classes.len(), |r| r.start_index);
        for (idx, c) in classes.iter().enumerate().take(next).skip(range.stop_index) {
            if !c.is_filler() {
                violations.push(violation(
                    ViolationKind::OrderInversion,
                    Some(idx),
                    format!("{} outside any round", c.name()),
                ));
            }
        }
    }

    match rounds.len().cmp(&model.rounds()) {
        std::cmp::Ordering::Less => violations.push(violation(
            ViolationKind::MissingRound,
            None,
            format!("found {} of {} rounds", rounds.len(), model.rounds()),
        )),
        std::cmp::Ordering::Greater => violations.push(violation(
            ViolationKind::RoundCountMismatch,
            None,
            format!("found {} rounds, expected {}", rounds.len(), model.rounds()),
        )),
        std::cmp::Ordering::Equal => {}
    }

    ValidationReport {
        video_id: log.video_id().to_string(),
        ok: violations.is_empty(),
        rounds,
        violations,
    }
}
