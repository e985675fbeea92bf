use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::LlmError;

const PROMPT_A: &str = include_str!("../../data/prompts/prompt_a.txt");
const PROMPT_B: &str = include_str!("../../data/prompts/prompt_b.txt");
const STUDENT_SUPPORT: &str = include_str!("../../data/prompts/student_support.txt");

const SECTION_MARKER: &str = "@@ ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    A,
    B,
    StudentSupport,
}

impl TemplateId {
    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::A => "a",
            TemplateId::B => "b",
            TemplateId::StudentSupport => "student_support",
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = LlmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" | "prompt_a" => Ok(TemplateId::A),
            "b" | "prompt_b" => Ok(TemplateId::B),
            "student_support" | "student-support" => Ok(TemplateId::StudentSupport),
            other => Err(LlmError::UnknownTemplate(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub name: String,
    pub text: String,
}

/// Ordered named text blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub id: TemplateId,
    pub sections: Vec<Section>,
}

/// Parse `@@ name` delimited blocks; text before the first marker is ignored.
pub fn parse_sections(text: &str) -> Vec<Section> {
    let mut sections: Vec<Section> = Vec::new();
    for line in text.lines() {
        if let Some(name) = line.strip_prefix(SECTION_MARKER) {
            sections.push(Section {
                name: name.trim().to_string(),
                text: String::new(),
            });
        } else if let Some(s) = sections.last_mut() {
            s.text.push_str(line);
            s.text.push('\n');
        }
    }
    for s in &mut sections {
        s.text = s.text.trim_end().to_string();
    }
    sections
}

impl PromptTemplate {
    pub fn builtin(id: TemplateId) -> Self {
        let text = match id {
            TemplateId::A => PROMPT_A,
            TemplateId::B => PROMPT_B,
            TemplateId::StudentSupport => STUDENT_SUPPORT,
        };
        Self {
            id,
            sections: parse_sections(text),
        }
    }

    pub fn section(&self, name: &str) -> Option<&str> {
        self.sections.iter().find(|s| s.name == name).map(|s| s.text.as_str())
    }

    pub fn has_procedure_description(&self) -> bool {
        self.section("procedure_description").is_some()
    }

    /// Sections joined by blank lines, with `overrides` replacing section
    /// text by name and the attachment reference appended.
    pub fn render(&self, video_ref: Option<&str>, overrides: &BTreeMap<String, String>) -> Result<String, LlmError> {
        if let Some(unknown) = overrides.keys().find(|k| self.section(k).is_none()) {
            return Err(LlmError::UnknownSection {
                template: self.id.to_string(),
                section: unknown.clone(),
            });
        }
        let mut blocks: Vec<&str> = self
            .sections
            .iter()
            .map(|s| overrides.get(&s.name).map_or(s.text.as_str(), String::as_str))
            .collect();
        let attachment;
        if let Some(r) = video_ref {
            attachment = format!("Attached video: {r}");
            blocks.push(&attachment);
        }
        let mut out = blocks.join("\n\n");
        out.push('\n');
        Ok(out)
    }
}

pub fn assemble_prompt(
    id: &str,
    video_ref: Option<&str>,
    overrides: &BTreeMap<String, String>,
) -> Result<String, LlmError> {
    PromptTemplate::builtin(id.parse()?).render(video_ref, overrides)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn none() -> BTreeMap<String, String> {
        BTreeMap::new()
    }

    #[test]
    fn prompt_a_has_procedure_blocks() {
        let p = assemble_prompt("A", Some("videos/N03T1.mp4"), &none()).unwrap();
        assert!(p.contains("THE GOLDEN RULE: CORE PROCEDURAL LOGIC"));
        assert!(p.contains("PHASE-BASED EVENT BOUNDARY DEFINITIONS"));
        assert!(p.contains("start_seconds, (start_mm:ss), stop_seconds, (stop_mm:ss), class_name, class_id"));
        assert!(p.trim_end().ends_with("Attached video: videos/N03T1.mp4"));
        assert!(PromptTemplate::builtin(TemplateId::A).has_procedure_description());
    }

    #[test]
    fn prompt_b_is_video_only() {
        let p = assemble_prompt("b", None, &none()).unwrap();
        assert!(p.contains("VIDEO ONLY ANALYSIS"));
        assert!(p.contains("Key Procedural Logic and Heuristics"));
        assert!(!p.contains("THE GOLDEN RULE"));
        assert!(!PromptTemplate::builtin(TemplateId::B).has_procedure_description());
    }

    #[test]
    fn unknown_ids_and_sections() {
        assert!(matches!(assemble_prompt("C", None, &none()), Err(LlmError::UnknownTemplate(_))));
        let mut o = none();
        o.insert("nope".into(), "x".into());
        assert!(matches!(assemble_prompt("A", None, &o), Err(LlmError::UnknownSection { .. })));
    }

    #[test]
    fn overrides_replace_sections_and_output_is_stable() {
        let mut o = none();
        o.insert("roles".into(), "ROLE".into());
        let p = assemble_prompt("A", None, &o).unwrap();
        assert!(p.starts_with("ROLE\n\nOBJECTIVE:"));
        assert_eq!(assemble_prompt("A", Some("v"), &none()).unwrap(), assemble_prompt("A", Some("v"), &none()).unwrap());
    }
}
