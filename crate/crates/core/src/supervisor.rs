//! Who answers drift questions during a run.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::adaptation::AdaptationReport;
use crate::disambiguation::{oracle_edits_until, Answer, DriftDescription, OracleLedger};
use crate::error::{Error, Result};
use crate::hierarchy::ConceptHierarchy;
use crate::streams::KdEvent;

/// Everything a supervisor may look at. `truth` is only meant for
/// simulated users.
#[derive(Clone, Copy, Debug)]
pub struct Question<'a> {
    pub description: &'a DriftDescription,
    pub hierarchy: &'a ConceptHierarchy,
    pub truth: &'a [KdEvent],
}

pub trait Supervisor {
    /// Returning an error aborts the run.
    fn answer(&mut self, q: &Question<'_>) -> Result<Answer>;

    /// Called after every answer. A rejected answer is followed by another
    /// call to [`Supervisor::answer`] for the same question.
    fn outcome(&mut self, _result: std::result::Result<&AdaptationReport, &Error>) {}

    /// How many rejected answers to tolerate per question before giving up.
    fn max_attempts(&self) -> Option<usize> {
        Some(8)
    }
}

impl<S: Supervisor + ?Sized> Supervisor for &mut S {
    fn answer(&mut self, q: &Question<'_>) -> Result<Answer> {
        (**self).answer(q)
    }

    fn outcome(&mut self, result: std::result::Result<&AdaptationReport, &Error>) {
        (**self).outcome(result)
    }

    fn max_attempts(&self) -> Option<usize> {
        (**self).max_attempts()
    }
}

/// Accepts the machine's guess every time.
#[derive(Clone, Copy, Debug, Default)]
pub struct AutoConfirm;

impl Supervisor for AutoConfirm {
    fn answer(&mut self, _q: &Question<'_>) -> Result<Answer> {
        Ok(Answer::confirm())
    }
}

/// Knows the ground truth: reports every event not reported yet and
/// deselects everything the machine highlighted.
#[derive(Clone, Debug, Default)]
pub struct PerfectUser {
    ledger: OracleLedger,
}

impl PerfectUser {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Supervisor for PerfectUser {
    fn answer(&mut self, q: &Question<'_>) -> Result<Answer> {
        Ok(Answer {
            edits: oracle_edits_until(q.description.iteration, q.truth, &mut self.ledger),
            deselected: q.description.flagged.clone(),
        })
    }
}

/// Plays back a fixed list of answers, then confirms.
#[derive(Clone, Debug, Default)]
pub struct ScriptedUser {
    script: VecDeque<Answer>,
}

impl ScriptedUser {
    pub fn new(script: impl IntoIterator<Item = Answer>) -> Self {
        ScriptedUser {
            script: script.into_iter().collect(),
        }
    }

    pub fn remaining(&self) -> usize {
        self.script.len()
    }
}

impl Supervisor for ScriptedUser {
    fn answer(&mut self, _q: &Question<'_>) -> Result<Answer> {
        Ok(self.script.pop_front().unwrap_or_default())
    }
}

/// Simulated user choice for headless interactive runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserModel {
    #[default]
    Perfect,
    AutoConfirm,
}

impl UserModel {
    pub fn build(self) -> Box<dyn Supervisor + Send> {
        match self {
            UserModel::Perfect => Box::new(PerfectUser::new()),
            UserModel::AutoConfirm => Box::new(AutoConfirm),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disambiguation::KdEdit;
    use crate::hierarchy::ConceptId;
    use crate::streams::KdEventKind;
    use std::collections::{BTreeMap, BTreeSet};

    fn desc(t: usize) -> DriftDescription {
        let flagged: BTreeSet<ConceptId> = [ConceptId::from("a")].into();
        DriftDescription {
            iteration: t,
            proposed_edits: vec![KdEdit::concept_drift("a")],
            flagged,
            scores: BTreeMap::new(),
            witnesses: BTreeMap::new(),
        }
    }

    #[test]
    fn perfect_user_reports_truth_once() {
        let h = ConceptHierarchy::new("root", "root");
        let truth = vec![KdEvent {
            iteration: 5,
            kind: KdEventKind::Edit(KdEdit::concept_removal("b")),
        }];
        let d = desc(10);
        let q = Question {
            description: &d,
            hierarchy: &h,
            truth: &truth,
        };
        let mut user = PerfectUser::new();
        let a = user.answer(&q).unwrap();
        assert_eq!(a.edits, vec![KdEdit::concept_removal("b")]);
        assert_eq!(a.deselected, d.flagged);
        assert!(user.answer(&q).unwrap().edits.is_empty());
    }

    #[test]
    fn scripted_user_falls_back_to_confirm() {
        let h = ConceptHierarchy::new("root", "root");
        let d = desc(1);
        let q = Question {
            description: &d,
            hierarchy: &h,
            truth: &[],
        };
        let mut user = ScriptedUser::new([Answer::reject_all(&d)]);
        assert_eq!(user.answer(&q).unwrap().deselected.len(), 1);
        assert_eq!(user.answer(&q).unwrap(), Answer::confirm());
    }
}
