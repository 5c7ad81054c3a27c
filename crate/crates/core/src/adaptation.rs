//! Knowledge-aware adaptation of windows and hierarchy, and the
//! forgetting-only baseline.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::disambiguation::KdEdit;
use crate::error::{Error, Result};
use crate::hierarchy::{ConceptHierarchy, ConceptId, HierarchyError};
use crate::windows::{Provenance, WindowEntry, WindowRole, WindowStore};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowChange {
    pub old_size: usize,
    pub new_size: usize,
    pub capacity_change: i64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AdaptationReport {
    /// Edits in the order they were applied.
    pub applied: Vec<KdEdit>,
    pub window_changes: BTreeMap<ConceptId, WindowChange>,
    pub hierarchy_version: u64,
}

fn batch_rank(e: &KdEdit) -> u8 {
    match e {
        KdEdit::RelationAddition { .. } | KdEdit::RelationRemoval { .. } => 0,
        KdEdit::ConceptDrift { .. } => 1,
        KdEdit::ConceptRemoval { .. } => 2,
    }
}

/// The order in which a batch is applied: relation edits, then drift swaps,
/// then concept removals. Relative order within a group is kept and
/// duplicates are dropped.
pub fn application_order(edits: &[KdEdit]) -> Vec<KdEdit> {
    let mut seen = BTreeSet::new();
    let mut out: Vec<KdEdit> = edits.iter().filter(|e| seen.insert(*e)).cloned().collect();
    out.sort_by_key(batch_rank);
    out
}

fn unknown(c: &ConceptId) -> Error {
    HierarchyError::UnknownConcept(c.clone()).into()
}

fn sizes(store: &WindowStore, c: &ConceptId) -> Option<(usize, usize)> {
    store.pair(c).map(|p| (p.total_len(), p.capacity()))
}

/// Applies `edits` to copies of `store` and `h`. Either every edit applies or
/// the inputs are left untouched and the first failure is returned.
pub fn adapt(
    store: &WindowStore,
    h: &ConceptHierarchy,
    edits: &[KdEdit],
) -> Result<(WindowStore, ConceptHierarchy, AdaptationReport)> {
    let mut store = store.clone();
    let mut h = h.clone();
    let ordered = application_order(edits);

    let mut touched = BTreeSet::new();
    for e in &ordered {
        touched.extend(e.concepts().into_iter().cloned());
    }
    let before: BTreeMap<ConceptId, (usize, usize)> = touched
        .iter()
        .filter_map(|c| sizes(&store, c).map(|s| (c.clone(), s)))
        .collect();

    for e in &ordered {
        match e {
            KdEdit::ConceptDrift { concept } => {
                if *concept == *h.root() {
                    return Err(HierarchyError::RootRemoval.into());
                }
                store.swap_to_past(concept)?;
            }
            KdEdit::ConceptRemoval { concept } => {
                h = h.remove_concept(concept)?;
                store.remove_concept(concept).ok_or_else(|| unknown(concept))?;
            }
            KdEdit::RelationAddition { child, parent } => {
                h = h.add_relation(child, parent)?;
                transfer_positives(&mut store, child, parent)?;
            }
            KdEdit::RelationRemoval { child, parent } => {
                h = h.remove_relation(child, parent)?;
                withdraw_positives(&mut store, child, parent)?;
            }
        }
    }

    let mut window_changes = BTreeMap::new();
    for c in &touched {
        let (old_size, old_cap) = before.get(c).copied().unwrap_or((0, 0));
        let (new_size, new_cap) = sizes(&store, c).unwrap_or((0, 0));
        if before.contains_key(c) || new_cap > 0 {
            window_changes.insert(
                c.clone(),
                WindowChange {
                    old_size,
                    new_size,
                    capacity_change: new_cap as i64 - old_cap as i64,
                },
            );
        }
    }
    let report = AdaptationReport {
        applied: ordered,
        window_changes,
        hierarchy_version: h.version(),
    };
    Ok((store, h, report))
}

/// Copies `child`'s positives into both windows of `parent` as positives,
/// tagged with their origin, after doubling the parent's capacity. The root
/// keeps no windows, so a new root link copies nothing.
fn transfer_positives(store: &mut WindowStore, child: &ConceptId, parent: &ConceptId) -> Result<()> {
    let source = store.pair(child).ok_or_else(|| unknown(child))?;
    let copies = |role: WindowRole| -> Vec<WindowEntry> {
        source
            .window(role)
            .entries()
            .iter()
            .filter(|e| e.label())
            .map(|e| {
                let mut copy = e.clone();
                copy.origin = Some(Provenance {
                    concept: child.clone(),
                    t: e.t,
                });
                copy
            })
            .collect()
    };
    let (old, cur) = (copies(WindowRole::Old), copies(WindowRole::Cur));
    let Some(target) = store.pair_mut(parent) else {
        return Ok(());
    };
    target.set_capacity(target.capacity() * 2);
    target.absorb(WindowRole::Old, old);
    target.absorb(WindowRole::Cur, cur);
    Ok(())
}

/// Drops from `parent`'s windows every positive that was copied from
/// `child`, and every positive `child` currently holds, then halves the
/// parent's capacity (never below its base size).
fn withdraw_positives(store: &mut WindowStore, child: &ConceptId, parent: &ConceptId) -> Result<()> {
    let source = store.pair(child).ok_or_else(|| unknown(child))?;
    let native: BTreeSet<u64> = source
        .w_old
        .entries()
        .iter()
        .chain(source.w_cur.entries())
        .filter(|e| e.label())
        .map(|e| e.uid)
        .collect();
    let Some(target) = store.pair_mut(parent) else {
        return Ok(());
    };
    let keep = |e: &WindowEntry| {
        let copied = e.origin.as_ref().is_some_and(|p| p.concept == *child);
        !(e.label() && (copied || native.contains(&e.uid)))
    };
    target.w_old.retain(keep);
    target.w_cur.retain(keep);
    let halved = (target.capacity() / 2).max(target.base_capacity());
    target.set_capacity(halved);
    Ok(())
}

/// Forgetting-only adaptation: every flagged concept moves its current
/// window to the past. Unknown concepts are ignored.
pub fn forget_adapt(store: &WindowStore, flagged: &BTreeSet<ConceptId>) -> WindowStore {
    let mut store = store.clone();
    for c in flagged {
        if let Some(pair) = store.pair_mut(c) {
            pair.swap_to_past();
        }
    }
    store
}
