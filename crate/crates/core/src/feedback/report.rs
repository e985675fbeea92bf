use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::lexicon::{Lexicon, MovementGroup};
use super::FeedbackError;
use crate::anomaly::{classify, AttributionVector};

pub const DEFAULT_TOP_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopAttribution {
    pub feature_name: String,
    pub value: f64,
}

/// The `k` largest-magnitude attributions; ties by feature name.
pub fn select_top_attributions(attr: &AttributionVector, k: usize) -> Vec<TopAttribution> {
    let mut idx: Vec<usize> = (0..attr.values.len()).collect();
    idx.sort_by(|&a, &b| {
        attr.values[b]
            .abs()
            .total_cmp(&attr.values[a].abs())
            .then_with(|| attr.feature_names[a].cmp(&attr.feature_names[b]))
    });
    idx.into_iter()
        .take(k.max(1))
        .map(|i| TopAttribution {
            feature_name: attr.feature_names[i].clone(),
            value: attr.values[i],
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rendering {
    Template,
    Llm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportSection {
    Strengths,
    Improvements,
}

/// A sentence asserting something about the student's movement, and the
/// attribution entries that back it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub section: ReportSection,
    pub sentence: String,
    pub features: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    /// 0 = student-like, 1 = nurse-like.
    pub label: u8,
    pub score: f64,
    pub threshold: f64,
}

impl Verdict {
    pub fn from_score(score: f64, threshold: f64) -> Self {
        Self {
            label: classify(score, threshold),
            score,
            threshold,
        }
    }

    pub fn performer(&self) -> &'static str {
        if self.label == 0 {
            "student"
        } else {
            "nurse"
        }
    }

    pub fn sentence(&self) -> String {
        let who = if self.label == 0 {
            "a student"
        } else {
            "an experienced nurse"
        };
        format!(
            "The model thinks this activity was performed by {who} (anomaly score {:.2}, threshold {:.2}).",
            self.score, self.threshold
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackReport {
    pub verdict: Verdict,
    pub performer_text: String,
    pub strengths: String,
    pub improvements: String,
    pub rendering: Rendering,
    pub source_attributions: Vec<TopAttribution>,
    pub claims: Vec<Claim>,
}

/// Split on `.`, `!` or `?` followed by whitespace or end of text.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let chars: Vec<char> = text.chars().collect();
    for (i, c) in chars.iter().enumerate() {
        cur.push(*c);
        if matches!(c, '.' | '!' | '?') && chars.get(i + 1).is_none_or(|n| n.is_whitespace()) {
            let s = cur.trim().to_string();
            if !s.is_empty() {
                out.push(s);
            }
            cur.clear();
        }
    }
    let s = cur.trim().to_string();
    if !s.is_empty() {
        out.push(s);
    }
    out
}

impl FeedbackReport {
    pub fn to_markdown(&self) -> String {
        let mut md = String::from("# Feedback report\n\n## Who performed the activity\n\n");
        md.push_str(&self.performer_text);
        md.push_str("\n\n## What was done well\n\n");
        md.push_str(&self.strengths);
        md.push_str("\n\n## What to improve\n\n");
        if self.improvements.is_empty() {
            md.push_str("Nothing to improve for this window.");
        } else {
            md.push_str(&self.improvements);
        }
        md.push('\n');
        md
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Rendered text shown to the student (all three sections).
    pub fn text(&self) -> String {
        format!("{}\n{}\n{}", self.performer_text, self.strengths, self.improvements)
    }
}

type Grouped = (MovementGroup, Vec<(String, f64)>);

fn grouped(
    lexicon: &Lexicon,
    feature_names: impl IntoIterator<Item = (String, f64)>,
) -> Result<Vec<Grouped>, FeedbackError> {
    // first-seen order
    let mut order: Vec<MovementGroup> = Vec::new();
    let mut members: BTreeMap<MovementGroup, Vec<(String, f64)>> = BTreeMap::new();
    for (name, v) in feature_names {
        let g = lexicon.group_of(&name)?;
        if !members.contains_key(&g) {
            order.push(g.clone());
        }
        members.entry(g).or_default().push((name, v));
    }
    Ok(order
        .into_iter()
        .map(|g| {
            let m = members.remove(&g).unwrap_or_default();
            (g, m)
        })
        .collect())
}

const MAX_CLAIMS: usize = 3;
const STRENGTH_CLAIMS: usize = 2;

/// Deterministic three-part report from a verdict and attributions.
///
/// Improvements come from the movement groups of the top attributions.
/// Strengths are the groups with the smallest total `|attribution|` over the
/// full vector, excluding groups already listed as improvements; this choice
/// is a heuristic.
pub fn verbalize_template(
    verdict: Verdict,
    attr: &AttributionVector,
    top_k: usize,
    lexicon: &Lexicon,
) -> Result<FeedbackReport, FeedbackError> {
    let top = select_top_attributions(attr, top_k);
    let performer_text = verdict.sentence();
    if verdict.label == 1 {
        return Ok(FeedbackReport {
            verdict,
            performer_text,
            strengths: lexicon.encouragement.join(" "),
            improvements: String::new(),
            rendering: Rendering::Template,
            source_attributions: top,
            claims: Vec::new(),
        });
    }

    let mut claims = Vec::new();
    let top_groups = grouped(lexicon, top.iter().map(|t| (t.feature_name.clone(), t.value)))?;
    let mut improvement_sentences = Vec::new();
    for (g, members) in top_groups.iter().take(MAX_CLAIMS) {
        let s = lexicon.improvement_phrase(g);
        claims.push(Claim {
            section: ReportSection::Improvements,
            sentence: s.clone(),
            features: members.iter().map(|m| m.0.clone()).collect(),
        });
        improvement_sentences.push(s);
    }
    if improvement_sentences.len() < 2 {
        improvement_sentences.extend(lexicon.improvement_closing.iter().take(1).cloned());
    }

    let all = grouped(
        lexicon,
        attr.feature_names.iter().cloned().zip(attr.values.iter().copied()),
    )?;
    let mut calm: Vec<(MovementGroup, f64, Vec<String>)> = all
        .into_iter()
        .filter(|(g, _)| !top_groups.iter().any(|(t, _)| t == g))
        .map(|(g, m)| {
            let total = m.iter().map(|(_, v)| v.abs()).sum::<f64>();
            (g, total, m.into_iter().map(|(n, _)| n).collect())
        })
        .collect();
    calm.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    let mut strength_sentences = Vec::new();
    for (g, _, features) in calm.into_iter().take(STRENGTH_CLAIMS) {
        let s = lexicon.strength_phrase(&g);
        claims.push(Claim {
            section: ReportSection::Strengths,
            sentence: s.clone(),
            features,
        });
        strength_sentences.push(s);
    }
    if strength_sentences.len() < 2 {
        strength_sentences.extend(lexicon.strength_closing.iter().take(1).cloned());
    }

    Ok(FeedbackReport {
        verdict,
        performer_text,
        strengths: strength_sentences.join(" "),
        improvements: improvement_sentences.join(" "),
        rendering: Rendering::Template,
        source_attributions: top,
        claims,
    })
}

/// Pull the three numbered (or headed) sections out of free LLM text.
pub fn parse_llm_sections(text: &str) -> Result<(String, String, String), FeedbackError> {
    let mut sections: Vec<String> = Vec::new();
    let mut cur: Option<String> = None;
    for line in text.lines() {
        let stripped = line.replace("**", "");
        let t = stripped.trim().trim_start_matches('#').trim();
        let numbered = ["1.", "2.", "3.", "1)", "2)", "3)"].iter().find(|p| t.starts_with(**p));
        if let Some(p) = numbered {
            if let Some(c) = cur.take() {
                sections.push(c);
            }
            cur = Some(t[p.len()..].trim().to_string());
        } else if let Some(c) = cur.as_mut() {
            if !t.is_empty() {
                if !c.is_empty() {
                    c.push(' ');
                }
                c.push_str(t);
            }
        }
    }
    if let Some(c) = cur.take() {
        sections.push(c);
    }
    if sections.len() != 3 {
        return Err(FeedbackError::MalformedLlmReport(format!(
            "expected 3 numbered sections, found {}",
            sections.len()
        )));
    }
    let mut it = sections.into_iter();
    Ok((it.next().unwrap(), it.next().unwrap(), it.next().unwrap()))
}

fn strip_heading(section: &str) -> String {
    // drop a leading question/heading sentence such as "What to improve:"
    match section.split_once(':') {
        Some((head, rest)) if head.split_whitespace().count() <= 8 && !head.contains('.') => rest.trim().to_string(),
        _ => section.trim().to_string(),
    }
}

/// Claims of an externally written section, each mapped through the
/// lexicon to the backing attribution entries (possibly none).
pub fn map_claims(
    section: ReportSection,
    text: &str,
    backing: &[String],
    lexicon: &Lexicon,
) -> Vec<Claim> {
    split_sentences(text)
        .into_iter()
        .filter(|s| !lexicon.is_neutral(s))
        .map(|sentence| {
            let pairs = lexicon.match_sentence(&sentence);
            let features = backing
                .iter()
                .filter(|f| {
                    lexicon
                        .group_of(f)
                        .map(|g| pairs.iter().any(|(r, a)| *r == g.region && *a == g.axis))
                        .unwrap_or(false)
                })
                .cloned()
                .collect();
            Claim {
                section,
                sentence,
                features,
            }
        })
        .collect()
}

/// Report from LLM text. The result still has to pass
/// [`super::check_report`] before use.
pub fn verbalize_llm(
    response: &str,
    verdict: Verdict,
    attr: &AttributionVector,
    top_k: usize,
    lexicon: &Lexicon,
) -> Result<FeedbackReport, FeedbackError> {
    let (who, well, improve) = parse_llm_sections(response)?;
    let (well, improve) = (strip_heading(&well), strip_heading(&improve));
    let top = select_top_attributions(attr, top_k);
    let top_names: Vec<String> = top.iter().map(|t| t.feature_name.clone()).collect();
    let mut claims = map_claims(ReportSection::Strengths, &well, &attr.feature_names, lexicon);
    claims.extend(map_claims(ReportSection::Improvements, &improve, &top_names, lexicon));
    Ok(FeedbackReport {
        verdict,
        performer_text: strip_heading(&who),
        strengths: well,
        improvements: if verdict.label == 1 { String::new() } else { improve },
        rendering: Rendering::Llm,
        source_attributions: top,
        claims: if verdict.label == 1 {
            claims.into_iter().filter(|c| c.section == ReportSection::Strengths).collect()
        } else {
            claims
        },
    })
}

/// LLM rendering when it passes the guard, otherwise the template.
pub fn render_with_fallback(
    response: Option<&str>,
    verdict: Verdict,
    attr: &AttributionVector,
    top_k: usize,
    lexicon: &Lexicon,
) -> Result<(FeedbackReport, Vec<String>), FeedbackError> {
    let mut warnings = Vec::new();
    if let Some(text) = response {
        match verbalize_llm(text, verdict, attr, top_k, lexicon)
            .and_then(|r| super::check_report(&r, attr, lexicon).map(|_| r))
        {
            Ok(r) => return Ok((r, warnings)),
            Err(e) => warnings.push(format!("llm rendering rejected, using template: {e}")),
        }
    }
    Ok((verbalize_template(verdict, attr, top_k, lexicon)?, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn attr(pairs: &[(&str, f64)]) -> AttributionVector {
        AttributionVector {
            feature_names: pairs.iter().map(|p| p.0.to_string()).collect(),
            values: pairs.iter().map(|p| p.1).collect(),
            standard_errors: vec![0.0; pairs.len()],
            base_value: 0.45,
            score: 0.45 + pairs.iter().map(|p| p.1).sum::<f64>(),
            n_permutations: 100,
            seed: 0,
        }
    }

    #[test]
    fn top_attribution_ordering() {
        let a = attr(&[("a", 0.3), ("b", -0.5), ("c", 0.1)]);
        let names = |v: Vec<TopAttribution>| v.into_iter().map(|t| t.feature_name).collect::<Vec<_>>();
        assert_eq!(names(select_top_attributions(&a, 2)), vec!["b", "a"]);
        let z = attr(&[("c", 0.0), ("a", 0.0), ("b", 0.0)]);
        assert_eq!(names(select_top_attributions(&z, 2)), vec!["a", "b"]);
        assert_eq!(select_top_attributions(&a, 10).len(), 3);
    }

    #[test]
    fn sentences_split() {
        assert_eq!(split_sentences("One. Two! Three? 0.5 stays"), vec!["One.", "Two!", "Three?", "0.5 stays"]);
    }

    #[test]
    fn parses_numbered_llm_output() {
        let text = "1. **Who:** a student.\n\n2. What went well: You kept your hand height close to that of an experienced nurse.\n3. Improve: Keep your body still.";
        let (a, b, c) = parse_llm_sections(text).unwrap();
        assert_eq!(strip_heading(&a), "a student.");
        assert!(b.starts_with("What went well"));
        assert_eq!(strip_heading(&c), "Keep your body still.");
        assert!(parse_llm_sections("just text").is_err());
    }
}
