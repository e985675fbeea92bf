use serde::{Deserialize, Serialize};

use super::{ActivityClass, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Preparation,
    Intervention,
    Cleanup,
    PostProcedure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseGroup {
    pub phase: Phase,
    pub classes: Vec<ActivityClass>,
}

/// The expert phase grammar each procedure round must follow.
///
/// `Others` is not part of the grammar; it is filler that can appear anywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcedureModel {
    phases: Vec<PhaseGroup>,
    optional_classes: Vec<ActivityClass>,
    rounds: usize,
    terminal_class: ActivityClass,
}

impl Default for ProcedureModel {
    fn default() -> Self {
        use ActivityClass::*;
        Self {
            phases: vec![
                PhaseGroup {
                    phase: Phase::Preparation,
                    classes: vec![CatheterPreparation],
                },
                PhaseGroup {
                    phase: Phase::Intervention,
                    classes: vec![AirwayRemoval, PhlegmSuctioning, AirwayRefitting],
                },
                PhaseGroup {
                    phase: Phase::Cleanup,
                    classes: vec![CatheterDisinfection, GloveDisposal],
                },
                PhaseGroup {
                    phase: Phase::PostProcedure,
                    classes: vec![Positioning, Auscultation],
                },
            ],
            optional_classes: vec![Positioning],
            rounds: 2,
            terminal_class: Auscultation,
        }
    }
}

impl ProcedureModel {
    pub fn with_rounds(rounds: usize) -> Result<Self, ModelError> {
        if rounds == 0 {
            return Err(ModelError::InvalidProcedure("rounds must be positive".into()));
        }
        Ok(Self {
            rounds,
            ..Self::default()
        })
    }

    pub fn phases(&self) -> &[PhaseGroup] {
        &self.phases
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn terminal_class(&self) -> ActivityClass {
        self.terminal_class
    }

    pub fn opening_class(&self) -> ActivityClass {
        self.phases[0].classes[0]
    }

    pub fn is_optional(&self, class: ActivityClass) -> bool {
        self.optional_classes.contains(&class)
    }

    pub fn phase_of(&self, class: ActivityClass) -> Option<Phase> {
        self.phases
            .iter()
            .find(|g| g.classes.contains(&class))
            .map(|g| g.phase)
    }

    /// Required (non-optional) grammar classes, in order.
    pub fn required_classes(&self) -> Vec<ActivityClass> {
        self.phases
            .iter()
            .flat_map(|g| g.classes.iter().copied())
            .filter(|c| !self.is_optional(*c))
            .collect()
    }

    /// Position of a class in the strict ordering
    /// `{0} < {1} < {2} < {3} < {4,5} < {6} < {7}`; `None` for filler.
    ///
    /// Cleanup classes share one rank; intervention and post-procedure
    /// classes are individually ordered.
    pub fn order_rank(&self, class: ActivityClass) -> Option<usize> {
        let mut rank = 0;
        for group in &self.phases {
            if group.phase == Phase::Cleanup {
                if group.classes.contains(&class) {
                    return Some(rank);
                }
                rank += 1;
            } else {
                for c in &group.classes {
                    if *c == class {
                        return Some(rank);
                    }
                    rank += 1;
                }
            }
        }
        None
    }

    /// Every grammar class 0–7 appears in exactly one group, and `Others` in none.
    pub fn check_coverage(&self) -> Result<(), ModelError> {
        for class in ActivityClass::ALL {
            let n = self.phases.iter().filter(|g| g.classes.contains(&class)).count();
            let expected = usize::from(!class.is_filler());
            if n != expected {
                return Err(ModelError::InvalidProcedure(format!(
                    "class {} appears in {n} phase groups",
                    class.id()
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_covers_grammar_classes_once() {
        let model = ProcedureModel::default();
        model.check_coverage().unwrap();
        assert_eq!(model.rounds(), 2);
        assert_eq!(model.terminal_class(), ActivityClass::Auscultation);
        assert!(model.is_optional(ActivityClass::Positioning));
        assert_eq!(model.phase_of(ActivityClass::Others), None);
    }

    #[test]
    fn order_ranks() {
        let model = ProcedureModel::default();
        let ranks: Vec<_> = ActivityClass::ALL.iter().map(|c| model.order_rank(*c)).collect();
        assert_eq!(
            ranks,
            vec![Some(0), Some(1), Some(2), Some(3), Some(4), Some(4), Some(5), Some(6), None]
        );
    }

    #[test]
    fn zero_rounds_rejected() {
        assert!(ProcedureModel::with_rounds(0).is_err());
        assert_eq!(ProcedureModel::with_rounds(3).unwrap().rounds(), 3);
    }
}
