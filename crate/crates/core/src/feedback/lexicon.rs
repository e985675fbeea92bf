use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::FeedbackError;

const BUILTIN: &str = include_str!("../../data/lexicon.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub id: String,
    pub joints: Vec<String>,
    pub singular: String,
    pub plural: String,
    pub terms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub id: String,
    pub adverb: String,
    pub noun: String,
    pub terms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Family {
    pub id: String,
    pub statistics: Vec<String>,
    pub improve: String,
    pub strength: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Override {
    pub region: String,
    pub axis: String,
    pub family: String,
    pub improve: String,
    pub strength: String,
}

/// A body-part movement: region × axis × statistic family.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MovementGroup {
    pub region: String,
    pub axis: String,
    pub family: String,
}

/// Controlled vocabulary for feature-free feedback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    pub regions: Vec<Region>,
    pub axes: Vec<Axis>,
    pub families: Vec<Family>,
    #[serde(default)]
    pub overrides: Vec<Override>,
    pub encouragement: Vec<String>,
    pub improvement_closing: Vec<String>,
    pub strength_closing: Vec<String>,
}

/// Lowercase, punctuation to spaces, single-space padded; for word matching.
pub(crate) fn normalize_words(text: &str) -> String {
    let mapped: String = text
        .chars()
        .map(|c| if c.is_alphanumeric() { c.to_ascii_lowercase() } else { ' ' })
        .collect();
    format!(" {} ", mapped.split_whitespace().collect::<Vec<_>>().join(" "))
}

fn mentions(words: &str, terms: &[String]) -> bool {
    terms.iter().any(|t| words.contains(&normalize_words(t)))
}

impl Lexicon {
    pub fn from_json(text: &str) -> Result<Self, FeedbackError> {
        let lex: Lexicon = serde_json::from_str(text).map_err(|e| FeedbackError::Lexicon(e.to_string()))?;
        lex.validate()?;
        Ok(lex)
    }

    pub fn builtin() -> &'static Lexicon {
        static LEX: OnceLock<Lexicon> = OnceLock::new();
        LEX.get_or_init(|| Lexicon::from_json(BUILTIN).expect("shipped lexicon is valid"))
    }

    fn validate(&self) -> Result<(), FeedbackError> {
        let mut joints = BTreeMap::new();
        for r in &self.regions {
            for j in &r.joints {
                if joints.insert(j.as_str(), r.id.as_str()).is_some() {
                    return Err(FeedbackError::Lexicon(format!("joint {j} in more than one region")));
                }
            }
        }
        let mut stats = BTreeMap::new();
        for f in &self.families {
            for s in &f.statistics {
                if stats.insert(s.as_str(), f.id.as_str()).is_some() {
                    return Err(FeedbackError::Lexicon(format!("statistic {s} in more than one family")));
                }
            }
        }
        // neutral sentences must not look like movement claims
        for s in self.neutral_sentences() {
            let w = normalize_words(s);
            if self.regions.iter().any(|r| mentions(&w, &r.terms)) {
                return Err(FeedbackError::Lexicon(format!("neutral sentence mentions a body region: {s:?}")));
            }
        }
        Ok(())
    }

    pub fn neutral_sentences(&self) -> impl Iterator<Item = &String> {
        self.encouragement
            .iter()
            .chain(&self.improvement_closing)
            .chain(&self.strength_closing)
    }

    pub fn is_neutral(&self, sentence: &str) -> bool {
        let s = sentence.trim();
        self.neutral_sentences().any(|n| n.trim() == s)
    }

    /// Movement group of `<joint>_<axis>__<statistic>`.
    pub fn group_of(&self, feature_name: &str) -> Result<MovementGroup, FeedbackError> {
        let missing = || FeedbackError::MissingLexiconEntry(feature_name.to_string());
        let (channel, stat) = feature_name.split_once("__").ok_or_else(missing)?;
        let (joint, axis) = channel.rsplit_once('_').ok_or_else(missing)?;
        let region = self
            .regions
            .iter()
            .find(|r| r.joints.iter().any(|j| j == joint))
            .ok_or_else(missing)?;
        let axis = self.axes.iter().find(|a| a.id == axis).ok_or_else(missing)?;
        let family = self
            .families
            .iter()
            .find(|f| f.statistics.iter().any(|s| s == stat))
            .ok_or_else(missing)?;
        Ok(MovementGroup {
            region: region.id.clone(),
            axis: axis.id.clone(),
            family: family.id.clone(),
        })
    }

    pub fn check_covers<'a>(&self, feature_names: impl IntoIterator<Item = &'a String>) -> Result<(), FeedbackError> {
        for f in feature_names {
            self.group_of(f)?;
        }
        Ok(())
    }

    fn phrase(&self, g: &MovementGroup, improve: bool) -> String {
        if let Some(o) = self
            .overrides
            .iter()
            .find(|o| o.region == g.region && o.axis == g.axis && o.family == g.family)
        {
            return if improve { o.improve.clone() } else { o.strength.clone() };
        }
        let region = self.regions.iter().find(|r| r.id == g.region).expect("group built from lexicon");
        let axis = self.axes.iter().find(|a| a.id == g.axis).expect("group built from lexicon");
        let family = self.families.iter().find(|f| f.id == g.family).expect("group built from lexicon");
        let template = if improve { &family.improve } else { &family.strength };
        template
            .replace("{singular}", &region.singular)
            .replace("{plural}", &region.plural)
            .replace("{axis_adverb}", &axis.adverb)
            .replace("{axis_noun}", &axis.noun)
    }

    pub fn improvement_phrase(&self, g: &MovementGroup) -> String {
        self.phrase(g, true)
    }

    pub fn strength_phrase(&self, g: &MovementGroup) -> String {
        self.phrase(g, false)
    }

    /// `(region, axis)` pairs a sentence talks about.
    pub fn match_sentence(&self, sentence: &str) -> Vec<(String, String)> {
        let w = normalize_words(sentence);
        let mut out = Vec::new();
        for r in self.regions.iter().filter(|r| mentions(&w, &r.terms)) {
            for a in self.axes.iter().filter(|a| mentions(&w, &a.terms)) {
                out.push((r.id.clone(), a.id.clone()));
            }
        }
        out
    }
}
