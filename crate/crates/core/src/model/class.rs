use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// The nine activity labels of the suctioning procedure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActivityClass {
    CatheterPreparation = 0,
    AirwayRemoval = 1,
    PhlegmSuctioning = 2,
    AirwayRefitting = 3,
    CatheterDisinfection = 4,
    GloveDisposal = 5,
    Positioning = 6,
    Auscultation = 7,
    Others = 8,
}

impl ActivityClass {
    pub const COUNT: usize = 9;

    pub const ALL: [ActivityClass; 9] = [
        ActivityClass::CatheterPreparation,
        ActivityClass::AirwayRemoval,
        ActivityClass::PhlegmSuctioning,
        ActivityClass::AirwayRefitting,
        ActivityClass::CatheterDisinfection,
        ActivityClass::GloveDisposal,
        ActivityClass::Positioning,
        ActivityClass::Auscultation,
        ActivityClass::Others,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_id(id: u8) -> Result<Self, ModelError> {
        Self::ALL
            .get(id as usize)
            .copied()
            .ok_or(ModelError::UnknownClassId(id as i64))
    }

    /// Canonical display name.
    pub fn name(self) -> &'static str {
        match self {
            ActivityClass::CatheterPreparation => "Catheter preparation",
            ActivityClass::AirwayRemoval => "Temporal removal of the artificial airway",
            ActivityClass::PhlegmSuctioning => "Suctioning phlegm",
            ActivityClass::AirwayRefitting => "Refitting the artificial airway",
            ActivityClass::CatheterDisinfection => "Catheter disinfection",
            ActivityClass::GloveDisposal => "Discarding gloves",
            ActivityClass::Positioning => "Positioning",
            ActivityClass::Auscultation => "Auscultation",
            ActivityClass::Others => "Others",
        }
    }

    pub fn is_filler(self) -> bool {
        self == ActivityClass::Others
    }
}

impl fmt::Display for ActivityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for ActivityClass {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u8(self.id())
    }
}

impl<'de> Deserialize<'de> for ActivityClass {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let id = u8::deserialize(deserializer)?;
        ActivityClass::from_id(id).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
struct ClassEntry {
    id: u8,
    name: String,
    #[serde(default)]
    synonyms: Vec<String>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
struct ClassNamesFile {
    classes: Vec<ClassEntry>,
}

/// Name → class lookup table, loaded from a JSON synonym file.
///
/// Matching is case-insensitive and ignores surrounding whitespace, repeated
/// inner whitespace and trailing punctuation.
#[derive(Debug, Clone)]
pub struct ClassNames {
    lookup: HashMap<String, ActivityClass>,
}

const DEFAULT_CLASS_NAMES: &str = include_str!("../../data/class_names.json");

impl ClassNames {
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let file: ClassNamesFile =
            serde_json::from_str(text).map_err(|e| ModelError::SynonymTable(e.to_string()))?;
        let mut lookup = HashMap::new();
        for entry in file.classes {
            let class = ActivityClass::from_id(entry.id)?;
            for name in std::iter::once(&entry.name).chain(entry.synonyms.iter()) {
                let key = normalize_name(name);
                if let Some(prev) = lookup.insert(key.clone(), class) {
                    if prev != class {
                        return Err(ModelError::SynonymTable(format!(
                            "name {key:?} maps to both {} and {}",
                            prev.id(),
                            class.id()
                        )));
                    }
                }
            }
        }
        // canonical names are always resolvable
        for class in ActivityClass::ALL {
            lookup.entry(normalize_name(class.name())).or_insert(class);
        }
        Ok(Self { lookup })
    }

    pub fn builtin() -> &'static ClassNames {
        static TABLE: OnceLock<ClassNames> = OnceLock::new();
        TABLE.get_or_init(|| ClassNames::from_json(DEFAULT_CLASS_NAMES).expect("builtin class table"))
    }

    pub fn resolve(&self, name: &str) -> Result<ActivityClass, ModelError> {
        self.lookup
            .get(&normalize_name(name))
            .copied()
            .ok_or_else(|| ModelError::UnknownClassName(name.trim().to_string()))
    }
}

fn normalize_name(name: &str) -> String {
    let trimmed = name
        .trim()
        .trim_matches(|c: char| matches!(c, '*' | '"' | '\'' | '`'))
        .trim_end_matches(['.', ',', ':', ';']);
    trimmed
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Resolve a class by canonical name or registered synonym using the builtin table.
pub fn class_from_name(name: &str) -> Result<ActivityClass, ModelError> {
    ClassNames::builtin().resolve(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_bijective_with_names() {
        for (i, class) in ActivityClass::ALL.iter().enumerate() {
            assert_eq!(class.id() as usize, i);
            assert_eq!(ActivityClass::from_id(i as u8).unwrap(), *class);
            assert_eq!(class_from_name(class.name()).unwrap(), *class);
        }
        assert!(ActivityClass::from_id(9).is_err());
    }

    #[test]
    fn lookup_examples() {
        assert_eq!(class_from_name("Auscultation").unwrap().id(), 7);
        assert_eq!(class_from_name("others").unwrap().id(), 8);
        assert_eq!(class_from_name("Phlegm suctioning").unwrap().id(), 2);
        assert_eq!(class_from_name("  SUCTIONING   phlegm. ").unwrap().id(), 2);
        assert_eq!(class_from_name("Temporal removal of the airway").unwrap().id(), 1);
        assert!(matches!(
            class_from_name("Suctioning"),
            Err(ModelError::UnknownClassName(_))
        ));
    }

    #[test]
    fn custom_table_extends_names() {
        let table = ClassNames::from_json(
            r#"{"classes":[{"id":7,"name":"Auscultation","synonyms":["Listening to the chest"]}]}"#,
        )
        .unwrap();
        assert_eq!(table.resolve("listening to the chest").unwrap(), ActivityClass::Auscultation);
        assert_eq!(table.resolve("Catheter preparation").unwrap().id(), 0);
    }

    #[test]
    fn conflicting_table_is_rejected() {
        let err = ClassNames::from_json(
            r#"{"classes":[{"id":1,"name":"x","synonyms":[]},{"id":2,"name":"X","synonyms":[]}]}"#,
        );
        assert!(matches!(err, Err(ModelError::SynonymTable(_))));
    }
}
