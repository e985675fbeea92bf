//! Three-part student feedback from anomaly verdicts and attributions,
//! rendered without feature names through a controlled movement lexicon,
//! plus the alignment bundle for manual verification.

mod bundle;
mod lexicon;
mod report;

pub use bundle::{
    assemble_student_prompt, attribution_summary, build_alignment_bundle, check_report, AlignmentBundle,
    PromptAssemblyWarning, StudentPrompt, WindowRange,
};
pub use lexicon::{Axis, Family, Lexicon, MovementGroup, Override, Region};
pub use report::{
    map_claims, parse_llm_sections, render_with_fallback, select_top_attributions, split_sentences, verbalize_llm,
    verbalize_template, Claim, FeedbackReport, Rendering, ReportSection, TopAttribution, Verdict, DEFAULT_TOP_K,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FeedbackError {
    #[error("no lexicon entry for feature {0:?}")]
    MissingLexiconEntry(String),
    #[error("invalid lexicon: {0}")]
    Lexicon(String),
    #[error("report claim has no backing attribution: {0:?}")]
    UnmappedClaim(String),
    #[error("report text names feature {0:?}")]
    FeatureNameLeak(String),
    #[error("malformed llm report: {0}")]
    MalformedLlmReport(String),
    #[error("io: {0}")]
    Io(String),
}
