use std::path::Path;

use serde::{Deserialize, Serialize};

use super::lexicon::Lexicon;
use super::report::{Claim, FeedbackReport, ReportSection, Verdict};
use super::FeedbackError;
use crate::anomaly::AttributionVector;
use crate::llm::{PromptTemplate, TemplateId};

/// Which recording and time range a report explains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRange {
    pub video_id: String,
    pub start_s: f64,
    pub stop_s: f64,
}

/// Everything needed to cross-check a report by hand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentBundle {
    pub report: FeedbackReport,
    pub attributions: AttributionVector,
    pub provenance: WindowRange,
    pub plot_data: Option<String>,
    pub mapping: Vec<Claim>,
}

/// Hallucination guard: no feature names in the text, and every claim
/// backed by attribution entries (improvements by the top entries).
pub fn check_report(report: &FeedbackReport, attr: &AttributionVector, lexicon: &Lexicon) -> Result<(), FeedbackError> {
    let text = report.text();
    if let Some(name) = attr.feature_names.iter().find(|n| text.contains(n.as_str())) {
        return Err(FeedbackError::FeatureNameLeak(name.clone()));
    }
    for claim in &report.claims {
        let allowed: Vec<&String> = match claim.section {
            ReportSection::Improvements => report.source_attributions.iter().map(|t| &t.feature_name).collect(),
            ReportSection::Strengths => attr.feature_names.iter().collect(),
        };
        if claim.features.is_empty() || claim.features.iter().any(|f| !allowed.contains(&f)) {
            return Err(FeedbackError::UnmappedClaim(claim.sentence.clone()));
        }
    }
    // every non-neutral sentence of both sections must be a recorded claim
    for (section, body) in [
        (ReportSection::Strengths, &report.strengths),
        (ReportSection::Improvements, &report.improvements),
    ] {
        for s in super::report::split_sentences(body) {
            if lexicon.is_neutral(&s) {
                continue;
            }
            if !report.claims.iter().any(|c| c.section == section && c.sentence == s) {
                return Err(FeedbackError::UnmappedClaim(s));
            }
        }
    }
    Ok(())
}

pub fn build_alignment_bundle(
    report: FeedbackReport,
    attr: &AttributionVector,
    provenance: WindowRange,
    plot_data: Option<String>,
    lexicon: &Lexicon,
) -> Result<AlignmentBundle, FeedbackError> {
    check_report(&report, attr, lexicon)?;
    let mapping = report.claims.clone();
    Ok(AlignmentBundle {
        report,
        attributions: attr.clone(),
        provenance,
        plot_data,
        mapping,
    })
}

impl AlignmentBundle {
    /// `report.md`, `report.json`, `attributions.csv`, `provenance.json`, `mapping.json`.
    pub fn write_dir(&self, dir: &Path) -> Result<(), FeedbackError> {
        let io = |e: std::io::Error| FeedbackError::Io(e.to_string());
        std::fs::create_dir_all(dir).map_err(io)?;
        std::fs::write(dir.join("report.md"), self.report.to_markdown()).map_err(io)?;
        std::fs::write(dir.join("report.json"), self.report.to_json()).map_err(io)?;
        std::fs::write(dir.join("attributions.csv"), self.attributions.to_csv()).map_err(io)?;
        #[derive(Serialize)]
        struct Provenance<'a> {
            window: &'a WindowRange,
            plot_data: &'a Option<String>,
            base_value: f64,
            score: f64,
            n_permutations: usize,
            seed: u64,
        }
        let prov = Provenance {
            window: &self.provenance,
            plot_data: &self.plot_data,
            base_value: self.attributions.base_value,
            score: self.attributions.score,
            n_permutations: self.attributions.n_permutations,
            seed: self.attributions.seed,
        };
        std::fs::write(dir.join("provenance.json"), pretty(&prov)).map_err(io)?;
        std::fs::write(dir.join("mapping.json"), pretty(&self.mapping)).map_err(io)?;
        Ok(())
    }
}

fn pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptAssemblyWarning(pub String);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudentPrompt {
    pub text: String,
    pub warnings: Vec<PromptAssemblyWarning>,
}

/// Text table of the verdict and ranked attributions.
pub fn attribution_summary(verdict: &Verdict, attr: &AttributionVector, top_k: usize) -> String {
    if attr.values.is_empty() {
        return String::new();
    }
    let mut s = format!(
        "Model output: label {} ({}), anomaly score {:.4}, threshold {:.2}, base value {:.4}\n\
         Shapley values of the anomaly score (positive values push towards label 0):\n\
         rank,feature,shapley_value\n",
        verdict.label,
        verdict.performer(),
        attr.score,
        verdict.threshold,
        attr.base_value
    );
    for (rank, i) in attr.ranking().into_iter().take(top_k.max(1)).enumerate() {
        s.push_str(&format!("{},{},{:.6}\n", rank + 1, attr.feature_names[i], attr.values[i]));
    }
    s.trim_end().to_string()
}

/// Student-support prompt with the summary placed between its context and
/// its instructions.
pub fn assemble_student_prompt(summary: &str, plot_ref: Option<&str>) -> StudentPrompt {
    let template = PromptTemplate::builtin(TemplateId::StudentSupport);
    let mut warnings = Vec::new();
    let mut blocks: Vec<String> = Vec::new();
    for section in &template.sections {
        if section.name == "instructions" {
            if summary.trim().is_empty() {
                warnings.push(PromptAssemblyWarning("attribution summary is empty".into()));
            } else {
                blocks.push(summary.trim_end().to_string());
            }
        }
        blocks.push(section.text.clone());
    }
    if let Some(r) = plot_ref {
        blocks.push(format!("Attached plot data: {r}"));
    }
    let mut text = blocks.join("\n\n");
    text.push('\n');
    StudentPrompt { text, warnings }
}
