//! Turning a detection into a drift description, and a description into a
//! list of structured knowledge-drift edits.
//!
//! Three sources of answers are supported: a simulated oracle reading the
//! ground-truth event log, a count-based likelihood-ratio test over the
//! joint labels of recent examples, and a human whose corrections are
//! merged with the machine's proposal.

use std::collections::{BTreeMap, BTreeSet};

use log::debug;
use serde::{Deserialize, Serialize};

use crate::detector::DetectionResult;
use crate::error::{Error, Result};
use crate::hierarchy::{ConceptHierarchy, ConceptId, HierarchyError};
use crate::kernels::{witness_examples, KernelConfig};
use crate::streams::{KdEvent, KdEventKind};
use crate::windows::{SnapshotEntry, WindowEntry, WindowStore, DISPLAY_FEATURES};

/// An atomic knowledge-drift edit to the machine's hierarchy and windows.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KdEdit {
    ConceptDrift { concept: ConceptId },
    ConceptRemoval { concept: ConceptId },
    RelationAddition { child: ConceptId, parent: ConceptId },
    RelationRemoval { child: ConceptId, parent: ConceptId },
}

impl KdEdit {
    pub fn concept_drift(c: impl Into<ConceptId>) -> Self {
        KdEdit::ConceptDrift { concept: c.into() }
    }

    pub fn concept_removal(c: impl Into<ConceptId>) -> Self {
        KdEdit::ConceptRemoval { concept: c.into() }
    }

    pub fn relation_addition(child: impl Into<ConceptId>, parent: impl Into<ConceptId>) -> Self {
        KdEdit::RelationAddition {
            child: child.into(),
            parent: parent.into(),
        }
    }

    pub fn relation_removal(child: impl Into<ConceptId>, parent: impl Into<ConceptId>) -> Self {
        KdEdit::RelationRemoval {
            child: child.into(),
            parent: parent.into(),
        }
    }

    pub fn concepts(&self) -> Vec<&ConceptId> {
        match self {
            KdEdit::ConceptDrift { concept } | KdEdit::ConceptRemoval { concept } => vec![concept],
            KdEdit::RelationAddition { child, parent } | KdEdit::RelationRemoval { child, parent } => {
                vec![child, parent]
            }
        }
    }

    pub fn touches(&self, c: &ConceptId) -> bool {
        self.concepts().contains(&c)
    }

    pub fn is_structural(&self) -> bool {
        !matches!(self, KdEdit::ConceptDrift { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessExample {
    #[serde(flatten)]
    pub example: SnapshotEntry,
    pub witness: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConceptWitnesses {
    /// Most characteristic of the past window.
    pub old: Vec<WitnessExample>,
    /// Most characteristic of the current window.
    pub new: Vec<WitnessExample>,
}

/// What the machine shows the user after a detection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftDescription {
    pub iteration: usize,
    pub flagged: BTreeSet<ConceptId>,
    pub scores: BTreeMap<ConceptId, f64>,
    pub proposed_edits: Vec<KdEdit>,
    pub witnesses: BTreeMap<ConceptId, ConceptWitnesses>,
}

/// A reply to a drift description.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    #[serde(default)]
    pub edits: Vec<KdEdit>,
    #[serde(default)]
    pub deselected: BTreeSet<ConceptId>,
}

impl Answer {
    /// Accept the machine's proposal unchanged.
    pub fn confirm() -> Self {
        Answer::default()
    }

    /// Reject every highlighted concept.
    pub fn reject_all(desc: &DriftDescription) -> Self {
        Answer {
            edits: Vec::new(),
            deselected: desc.flagged.clone(),
        }
    }
}

fn to_witness(w: &crate::kernels::Witness<'_, WindowEntry>) -> WitnessExample {
    WitnessExample {
        example: SnapshotEntry::from_entry(w.point, DISPLAY_FEATURES),
        witness: w.value,
    }
}

pub fn build_description(
    det: &DetectionResult,
    store: &WindowStore,
    kcfg: &KernelConfig,
    m_witness: usize,
    iteration: usize,
) -> Result<DriftDescription> {
    if det.flagged.is_empty() {
        return Err(Error::InvalidArgument("no flagged concepts to describe".into()));
    }
    if m_witness == 0 {
        return Err(Error::InvalidArgument("witness count must be at least 1".into()));
    }
    let mut witnesses = BTreeMap::new();
    for c in &det.flagged {
        let pair = store.pair(c).ok_or_else(|| HierarchyError::UnknownConcept(c.clone()))?;
        let entry = if pair.w_old.is_empty() || pair.w_cur.is_empty() {
            ConceptWitnesses::default()
        } else {
            let (old, new) = witness_examples(pair.w_old.entries(), pair.w_cur.entries(), kcfg, m_witness)?;
            ConceptWitnesses {
                old: old.iter().map(to_witness).collect(),
                new: new.iter().map(to_witness).collect(),
            }
        };
        witnesses.insert(c.clone(), entry);
    }
    Ok(DriftDescription {
        iteration,
        flagged: det.flagged.clone(),
        scores: det.scores.clone(),
        proposed_edits: det.flagged.iter().cloned().map(KdEdit::concept_drift).collect(),
        witnesses,
    })
}

/// Remembers which ground-truth events have already been reported so the
/// simulated oracle never reports one twice.
#[derive(Clone, Debug, Default)]
pub struct OracleLedger {
    applied: BTreeSet<usize>,
}

impl OracleLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_applied(&self, index: usize) -> bool {
        self.applied.contains(&index)
    }

    /// Indices of events up to `iteration` that were not reported yet.
    pub fn pending(&self, iteration: usize, truth: &[KdEvent]) -> Vec<usize> {
        truth
            .iter()
            .enumerate()
            .filter(|(i, e)| e.iteration <= iteration && !self.applied.contains(i))
            .map(|(i, _)| i)
            .collect()
    }

    /// Marks an event as consumed without reporting it.
    pub fn mark(&mut self, index: usize) {
        self.applied.insert(index);
    }
}

/// Edits for every unreported ground-truth event up to the description's
/// iteration, in chronological order. The machine's proposal is ignored.
/// Concept additions are consumed silently: the runner tracks new concepts
/// as soon as they show up in labels.
pub fn oracle_answer(desc: &DriftDescription, truth: &[KdEvent], ledger: &mut OracleLedger) -> Vec<KdEdit> {
    oracle_edits_until(desc.iteration, truth, ledger)
}

pub fn oracle_edits_until(iteration: usize, truth: &[KdEvent], ledger: &mut OracleLedger) -> Vec<KdEdit> {
    let mut edits = Vec::new();
    for i in ledger.pending(iteration, truth) {
        ledger.mark(i);
        if let KdEventKind::Edit(edit) = &truth[i].kind {
            edits.push(edit.clone());
        }
    }
    edits
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LlrConfig {
    /// Likelihood-ratio threshold; `None` is infinity, i.e. an exact
    /// zero-violation test.
    #[serde(default)]
    pub beta: Option<f64>,
    /// Number of most recent examples whose joint labels are counted.
    #[serde(default = "default_llr_recent")]
    pub recent: usize,
}

fn default_llr_recent() -> usize {
    70
}

impl Default for LlrConfig {
    fn default() -> Self {
        LlrConfig {
            beta: None,
            recent: default_llr_recent(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct PairCounts {
    /// j positive, i positive
    both: usize,
    /// j positive, i negative
    violations: usize,
    i_pos: usize,
    i_neg: usize,
}

impl LlrConfig {
    fn implies(&self, n: &PairCounts) -> bool {
        match self.beta {
            None => n.violations == 0 && n.both > 0,
            Some(beta) => {
                let num = (n.both as f64 + 1.0) / (n.i_pos as f64 + 2.0);
                let den = (n.violations as f64 + 1.0) / (n.i_neg as f64 + 2.0);
                n.both > 0 && num / den >= beta
            }
        }
    }
}

/// Fully automated disambiguation: tests `j is-a i` for ordered pairs with
/// at least one flagged member, using the joint labels of recent examples.
pub fn llr_disambiguate(
    desc: &DriftDescription,
    store: &WindowStore,
    h: &ConceptHierarchy,
    cfg: &LlrConfig,
) -> Vec<KdEdit> {
    let recent: Vec<_> = store.history(cfg.recent).collect();
    let concepts: Vec<&ConceptId> = h.non_root_concepts().collect();
    let count = |j: &ConceptId, i: &ConceptId| {
        let mut n = PairCounts::default();
        for z in &recent {
            let (yj, yi) = (z.y.get(j), z.y.get(i));
            if yi {
                n.i_pos += 1;
            } else {
                n.i_neg += 1;
            }
            match (yj, yi) {
                (true, true) => n.both += 1,
                (true, false) => n.violations += 1,
                _ => {}
            }
        }
        n
    };

    let mut additions = Vec::new();
    let mut removals = Vec::new();
    for &j in &concepts {
        for &i in &concepts {
            if i == j || !(desc.flagged.contains(i) || desc.flagged.contains(j)) {
                continue;
            }
            let n = count(j, i);
            let implied = cfg.implies(&n);
            if h.has_edge(j, i) {
                if !implied && n.violations > 0 {
                    removals.push(KdEdit::relation_removal(j.clone(), i.clone()));
                }
            } else if implied {
                additions.push((j.clone(), i.clone()));
            }
        }
    }

    // Most specific parents first, so implied links through them are skipped.
    additions.sort_by_key(|(_, i)| h.descendants(i).map(|d| d.len()).unwrap_or(0));
    let mut scratch = h.clone();
    let mut edits = Vec::new();
    for r in removals {
        if let KdEdit::RelationRemoval { child, parent } = &r {
            match scratch.remove_relation(child, parent) {
                Ok(next) => {
                    scratch = next;
                    edits.push(r);
                }
                Err(e) => debug!("llr: skipping removal {child} -> {parent}: {e}"),
            }
        }
    }
    for (j, i) in additions {
        if scratch.ancestors(&j).map(|a| a.contains(&i)).unwrap_or(true) {
            continue;
        }
        match scratch.add_relation(&j, &i) {
            Ok(next) => {
                scratch = next;
                edits.push(KdEdit::relation_addition(j, i));
            }
            Err(e) => debug!("llr: skipping addition {j} -> {i}: {e}"),
        }
    }
    for c in &desc.flagged {
        if !edits.iter().any(|e| e.touches(c)) {
            edits.push(KdEdit::concept_drift(c.clone()));
        }
    }
    edits
}

/// The machine proposal minus deselected concepts, plus the user's edits.
/// A user edit on a concept overrides any proposal on that concept.
pub fn merge_user_edits(
    desc: &DriftDescription,
    user_edits: &[KdEdit],
    deselected: &BTreeSet<ConceptId>,
    h: &ConceptHierarchy,
) -> Result<Vec<KdEdit>> {
    for e in user_edits {
        for c in e.concepts() {
            if !h.contains(c) {
                return Err(HierarchyError::UnknownConcept(c.clone()).into());
            }
        }
    }
    let user_touched: BTreeSet<&ConceptId> = user_edits.iter().flat_map(|e| e.concepts()).collect();
    let mut out: Vec<KdEdit> = Vec::new();
    for p in &desc.proposed_edits {
        let concepts = p.concepts();
        if concepts
            .iter()
            .any(|c| deselected.contains(*c) || user_touched.contains(*c))
        {
            continue;
        }
        if !out.contains(p) {
            out.push(p.clone());
        }
    }
    for e in user_edits {
        if !out.contains(e) {
            out.push(e.clone());
        }
    }
    Ok(out)
}
