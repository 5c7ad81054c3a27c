//! Per-concept past/current windows and the kNN rule over them.
//!
//! Every concept keeps two windows of `(x, y^i)` restrictions. The current
//! window slides with the stream; the past window is a frozen reference that
//! only changes when the concept is declared to have drifted. A fraction of
//! each window (2/3 by default) is reserved for negatives, because most
//! examples do not belong to most concepts.

use std::cmp::Ordering;
use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::{ConceptHierarchy, ConceptId, HierarchyError, LabelVector};
use crate::kernels::{squared_distance, ExamplePoint, KernelPoint};

/// A fully labelled stream example. `uid` orders examples by arrival.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub uid: u64,
    pub t: usize,
    pub x: Arc<[f64]>,
    pub y: LabelVector,
}

impl Example {
    pub fn restrict(&self, c: &ConceptId) -> WindowEntry {
        WindowEntry {
            uid: self.uid,
            t: self.t,
            point: ExamplePoint {
                x: self.x.clone(),
                y: self.y.get(c),
            },
            origin: None,
        }
    }
}

/// Where a copied example came from (set when positives are transferred
/// between concepts on relation addition).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub concept: ConceptId,
    pub t: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowEntry {
    pub uid: u64,
    pub t: usize,
    pub point: ExamplePoint,
    pub origin: Option<Provenance>,
}

impl WindowEntry {
    pub fn label(&self) -> bool {
        self.point.y
    }
}

impl KernelPoint for WindowEntry {
    fn features(&self) -> &[f64] {
        &self.point.x
    }

    fn label(&self) -> bool {
        self.point.y
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub capacity: usize,
    pub neg_fraction: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            capacity: 200,
            neg_fraction: 2.0 / 3.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub k: usize,
}

impl ClassifierConfig {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        Ok(ClassifierConfig { k })
    }
}

/// Entries in ascending `uid` order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Window {
    entries: Vec<WindowEntry>,
}

impl Window {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[WindowEntry] {
        &self.entries
    }

    /// The `m` most recent entries.
    pub fn recent(&self, m: usize) -> &[WindowEntry] {
        &self.entries[self.entries.len().saturating_sub(m)..]
    }

    pub fn count(&self, label: bool) -> usize {
        self.entries.iter().filter(|e| e.label() == label).count()
    }

    pub fn contains_uid(&self, uid: u64) -> bool {
        self.entries.binary_search_by_key(&uid, |e| e.uid).is_ok()
    }

    /// Inserts in uid order; an entry with the same uid is replaced.
    pub fn insert(&mut self, entry: WindowEntry) {
        match self.entries.binary_search_by_key(&entry.uid, |e| e.uid) {
            Ok(i) => self.entries[i] = entry,
            Err(i) => self.entries.insert(i, entry),
        }
    }

    fn evict_oldest(&mut self, label: bool) -> Option<WindowEntry> {
        let i = self.entries.iter().position(|e| e.label() == label)?;
        Some(self.entries.remove(i))
    }

    pub fn retain(&mut self, f: impl FnMut(&WindowEntry) -> bool) {
        self.entries.retain(f);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowRole {
    Old,
    Cur,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowPair {
    pub concept: ConceptId,
    pub w_old: Window,
    pub w_cur: Window,
    capacity: usize,
    base_capacity: usize,
    neg_fraction: f64,
}

impl WindowPair {
    pub fn new(concept: ConceptId, cfg: &WindowConfig) -> Self {
        WindowPair {
            concept,
            w_old: Window::default(),
            w_cur: Window::default(),
            capacity: cfg.capacity,
            base_capacity: cfg.capacity,
            neg_fraction: cfg.neg_fraction,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn base_capacity(&self) -> usize {
        self.base_capacity
    }

    /// Changes the capacity and evicts from both windows until they fit.
    pub fn set_capacity(&mut self, capacity: usize) {
        self.capacity = capacity.max(1);
        let (neg_cap, pos_cap) = (self.neg_cap(), self.pos_cap());
        let cap = self.capacity;
        for w in [&mut self.w_old, &mut self.w_cur] {
            enforce(w, cap, neg_cap, pos_cap, None);
        }
    }

    pub fn neg_cap(&self) -> usize {
        (self.neg_fraction * self.capacity as f64).ceil() as usize
    }

    pub fn pos_cap(&self) -> usize {
        self.capacity - (self.neg_fraction * self.capacity as f64).floor() as usize
    }

    pub fn window(&self, role: WindowRole) -> &Window {
        match role {
            WindowRole::Old => &self.w_old,
            WindowRole::Cur => &self.w_cur,
        }
    }

    pub fn window_mut(&mut self, role: WindowRole) -> &mut Window {
        match role {
            WindowRole::Old => &mut self.w_old,
            WindowRole::Cur => &mut self.w_cur,
        }
    }

    /// Appends to the current window with class-aware eviction.
    pub fn push_current(&mut self, entry: WindowEntry) {
        let incoming = entry.label();
        self.w_cur.insert(entry);
        let (cap, neg_cap, pos_cap) = (self.capacity, self.neg_cap(), self.pos_cap());
        enforce(&mut self.w_cur, cap, neg_cap, pos_cap, Some(incoming));
    }

    /// Adds entries to a window (used by knowledge transfer) and evicts to fit.
    pub fn absorb(&mut self, role: WindowRole, entries: impl IntoIterator<Item = WindowEntry>) {
        let (cap, neg_cap, pos_cap) = (self.capacity, self.neg_cap(), self.pos_cap());
        let w = self.window_mut(role);
        for e in entries {
            w.insert(e);
        }
        enforce(w, cap, neg_cap, pos_cap, Some(true));
    }

    pub fn swap_to_past(&mut self) {
        self.w_old = std::mem::take(&mut self.w_cur);
    }

    pub fn total_len(&self) -> usize {
        self.w_old.len() + self.w_cur.len()
    }

    /// Window used for prediction: current, or past while current is empty.
    pub fn predictive_window(&self) -> &Window {
        if self.w_cur.is_empty() {
            &self.w_old
        } else {
            &self.w_cur
        }
    }
}

/// Evicts oldest-first until `w` fits. A class over its own cap loses first;
/// otherwise a class may keep capacity it borrowed from the other until an
/// example of the other class arrives.
fn enforce(w: &mut Window, cap: usize, neg_cap: usize, pos_cap: usize, incoming: Option<bool>) {
    while w.len() > cap {
        let neg = w.count(false);
        let pos = w.len() - neg;
        let victim = if neg > neg_cap {
            false
        } else if pos > pos_cap {
            true
        } else {
            match incoming {
                Some(true) if neg >= neg_cap => false,
                Some(false) if pos >= pos_cap => true,
                Some(label) => label,
                None => neg * pos_cap < pos * neg_cap,
            }
        };
        if w.evict_oldest(victim).is_none() {
            w.evict_oldest(!victim);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowStore {
    pairs: BTreeMap<ConceptId, WindowPair>,
    config: WindowConfig,
    history: VecDeque<Example>,
    history_len: usize,
}

impl WindowStore {
    /// Empty windows for every non-root concept of `h`.
    pub fn empty(h: &ConceptHierarchy, config: WindowConfig) -> Self {
        let pairs = h
            .non_root_concepts()
            .map(|c| (c.clone(), WindowPair::new(c.clone(), &config)))
            .collect();
        WindowStore {
            pairs,
            config,
            history: VecDeque::new(),
            history_len: config.capacity,
        }
    }

    pub fn config(&self) -> &WindowConfig {
        &self.config
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&ConceptId, &WindowPair)> {
        self.pairs.iter()
    }

    pub fn concepts(&self) -> impl Iterator<Item = &ConceptId> {
        self.pairs.keys()
    }

    pub fn pair(&self, c: &ConceptId) -> Option<&WindowPair> {
        self.pairs.get(c)
    }

    pub fn pair_mut(&mut self, c: &ConceptId) -> Option<&mut WindowPair> {
        self.pairs.get_mut(c)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Starts tracking a new concept with empty windows.
    pub fn add_concept(&mut self, c: ConceptId) {
        let cfg = self.config;
        self.pairs.entry(c.clone()).or_insert_with(|| WindowPair::new(c, &cfg));
    }

    pub fn remove_concept(&mut self, c: &ConceptId) -> Option<WindowPair> {
        self.pairs.remove(c)
    }

    /// Appends `(x, y^i)` to every current window. Concepts missing from the
    /// example's labels are read as negative.
    pub fn push_example(&mut self, z: &Example) {
        for (c, pair) in self.pairs.iter_mut() {
            pair.push_current(z.restrict(c));
        }
        self.history.push_back(z.clone());
        while self.history.len() > self.history_len {
            self.history.pop_front();
        }
    }

    /// Appends examples to the current windows only, leaving the history
    /// untouched.
    pub fn fill_current(&mut self, examples: &[Example]) {
        for z in examples {
            for (c, pair) in self.pairs.iter_mut() {
                pair.push_current(z.restrict(c));
            }
        }
    }

    /// The `m` most recent full examples seen by the store.
    pub fn history(&self, m: usize) -> impl Iterator<Item = &Example> {
        self.history.iter().skip(self.history.len().saturating_sub(m))
    }

    pub fn swap_to_past(&mut self, c: &ConceptId) -> Result<()> {
        let pair = self
            .pairs
            .get_mut(c)
            .ok_or_else(|| HierarchyError::UnknownConcept(c.clone()))?;
        pair.swap_to_past();
        Ok(())
    }

    pub fn is_all_empty(&self) -> bool {
        self.pairs.values().all(|p| p.total_len() == 0)
    }

    pub fn snapshot(&self, c: &ConceptId, role: WindowRole, max_examples: usize) -> Option<WindowSnapshot> {
        let pair = self.pairs.get(c)?;
        let w = pair.window(role);
        Some(WindowSnapshot {
            concept: c.clone(),
            role,
            size: w.len(),
            capacity: pair.capacity,
            examples: w
                .recent(max_examples)
                .iter()
                .map(|e| SnapshotEntry::from_entry(e, DISPLAY_FEATURES))
                .collect(),
        })
    }
}

/// Features shown per example in serialized snapshots and descriptions.
pub const DISPLAY_FEATURES: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub uid: u64,
    pub t: usize,
    pub label: bool,
    pub dim: usize,
    pub features: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub origin: Option<Provenance>,
}

impl SnapshotEntry {
    pub fn from_entry(e: &WindowEntry, max_features: usize) -> Self {
        SnapshotEntry {
            uid: e.uid,
            t: e.t,
            label: e.label(),
            dim: e.point.x.len(),
            features: e.point.x.iter().take(max_features).copied().collect(),
            origin: e.origin.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowSnapshot {
    pub concept: ConceptId,
    pub role: WindowRole,
    pub size: usize,
    pub capacity: usize,
    pub examples: Vec<SnapshotEntry>,
}

/// Builds the store from the initial data set: each past window holds the
/// most recent `min(w, |S1|)` restrictions, subject to the per-class caps.
pub fn init_windows(s1: &[Example], h: &ConceptHierarchy, cfg: WindowConfig) -> Result<WindowStore> {
    if s1.is_empty() {
        return Err(Error::InvalidArgument("initial data set is empty".into()));
    }
    if cfg.capacity == 0 {
        return Err(Error::InvalidArgument("window capacity must be positive".into()));
    }
    let mut store = WindowStore::empty(h, cfg);
    let recent = &s1[s1.len().saturating_sub(cfg.capacity)..];
    for (c, pair) in store.pairs.iter_mut() {
        let (neg_cap, pos_cap) = (pair.neg_cap(), pair.pos_cap());
        let (mut neg, mut pos) = (0, 0);
        for z in recent.iter().rev() {
            let entry = z.restrict(c);
            if neg + pos >= pair.capacity {
                break;
            }
            let (slot, cap) = if entry.label() {
                (&mut pos, pos_cap)
            } else {
                (&mut neg, neg_cap)
            };
            if *slot < cap {
                *slot += 1;
                pair.w_old.insert(entry);
            }
        }
    }
    for z in s1 {
        store.history.push_back(z.clone());
    }
    while store.history.len() > store.history_len {
        store.history.pop_front();
    }
    Ok(store)
}

fn neighbor_order<T>(a: &(f64, u64, T), b: &(f64, u64, T)) -> Ordering {
    // nearer first, then newer first
    a.0.total_cmp(&b.0).then(b.1.cmp(&a.1))
}

/// The `k` nearest of `(squared distance, uid, payload)` candidates.
fn nearest<T>(mut cands: Vec<(f64, u64, T)>, k: usize) -> Vec<(f64, u64, T)> {
    if cands.len() > k {
        cands.select_nth_unstable_by(k - 1, neighbor_order);
        cands.truncate(k);
    }
    cands
}

/// Majority vote of the `min(k, n)` nearest entries; ties vote negative.
pub fn knn_vote(x: &[f64], entries: &[WindowEntry], k: usize) -> bool {
    if entries.is_empty() {
        return false;
    }
    let cands = entries
        .iter()
        .map(|e| (squared_distance(x, &e.point.x), e.uid, e.label()))
        .collect();
    let picked = nearest(cands, k.max(1));
    let positives = picked.iter().filter(|n| n.2).count();
    2 * positives > picked.len()
}

fn check_dim(x: &[f64], entry: Option<&WindowEntry>) -> Result<()> {
    match entry {
        Some(e) if e.point.x.len() != x.len() => Err(Error::DimensionMismatch {
            left: x.len(),
            right: e.point.x.len(),
        }),
        _ => Ok(()),
    }
}

/// Per-concept kNN over current windows (past window while the current one
/// is empty), made consistent with `h`. The root is always predicted.
pub fn predict(x: &[f64], store: &WindowStore, h: &ConceptHierarchy, cfg: &ClassifierConfig) -> Result<LabelVector> {
    if store.is_all_empty() {
        return Err(Error::NoExamples);
    }
    let mut labels = LabelVector::new();
    labels.set(h.root().clone(), true);
    for c in h.non_root_concepts() {
        let vote = match store.pair(c) {
            Some(pair) => {
                let w = pair.predictive_window();
                check_dim(x, w.entries().first())?;
                knn_vote(x, w.entries(), cfg.k)
            }
            None => false,
        };
        labels.set(c.clone(), vote);
    }
    Ok(h.closure(&labels)?)
}

/// A single FIFO window shared by all concepts.
#[derive(Clone, Debug, Default)]
pub struct SlidingWindow {
    entries: VecDeque<Example>,
    capacity: usize,
}

impl SlidingWindow {
    pub fn new(capacity: usize) -> Self {
        SlidingWindow {
            entries: VecDeque::with_capacity(capacity),
            capacity: capacity.max(1),
        }
    }

    pub fn push(&mut self, z: Example) {
        self.entries.push_back(z);
        while self.entries.len() > self.capacity {
            self.entries.pop_front();
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn predict(&self, x: &[f64], h: &ConceptHierarchy, cfg: &ClassifierConfig) -> Result<LabelVector> {
        let first = self.entries.front().ok_or(Error::NoExamples)?;
        if first.x.len() != x.len() {
            return Err(Error::DimensionMismatch {
                left: x.len(),
                right: first.x.len(),
            });
        }
        let cands = self
            .entries
            .iter()
            .map(|z| (squared_distance(x, &z.x), z.uid, &z.y))
            .collect();
        let picked = nearest(cands, cfg.k.max(1));
        let mut labels = LabelVector::new();
        labels.set(h.root().clone(), true);
        for c in h.non_root_concepts() {
            let positives = picked.iter().filter(|n| n.2.get(c)).count();
            labels.set(c.clone(), 2 * positives > picked.len());
        }
        Ok(h.closure(&labels)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> ConceptId {
        ConceptId::from(s)
    }

    fn flat() -> ConceptHierarchy {
        ConceptHierarchy::new("root", "root")
            .add_concept("a", "a", &[id("root")])
            .unwrap()
    }

    fn ex(uid: u64, x: f64, pos: bool) -> Example {
        let mut y = LabelVector::new();
        y.set(id("root"), true);
        y.set(id("a"), pos);
        Example {
            uid,
            t: uid as usize,
            x: vec![x].into(),
            y,
        }
    }

    fn cfg(w: usize) -> WindowConfig {
        WindowConfig {
            capacity: w,
            neg_fraction: 2.0 / 3.0,
        }
    }

    #[test]
    fn allocation_caps() {
        let p = WindowPair::new(id("a"), &cfg(3));
        assert_eq!((p.neg_cap(), p.pos_cap()), (2, 1));
        let p = WindowPair::new(id("a"), &cfg(200));
        assert_eq!((p.neg_cap(), p.pos_cap()), (134, 67));
    }

    #[test]
    fn init_full_and_partial() {
        let h = flat();
        let s1: Vec<_> = (0..3).map(|i| ex(i, i as f64, i == 0)).collect();
        let store = init_windows(&s1, &h, cfg(3)).unwrap();
        let pair = store.pair(&id("a")).unwrap();
        assert_eq!(pair.w_old.len(), 3);
        assert!(pair.w_cur.is_empty());

        let store = init_windows(&s1[..2], &h, cfg(3)).unwrap();
        assert_eq!(store.pair(&id("a")).unwrap().w_old.len(), 2);
        assert!(init_windows(&[], &h, cfg(3)).is_err());
    }

    #[test]
    fn init_respects_positive_cap() {
        let h = flat();
        let s1: Vec<_> = (0..5).map(|i| ex(i, i as f64, true)).collect();
        let store = init_windows(&s1, &h, cfg(3)).unwrap();
        let w = &store.pair(&id("a")).unwrap().w_old;
        assert_eq!(w.len(), 1);
        assert_eq!(w.entries()[0].uid, 4);
    }

    #[test]
    fn push_evicts_oldest_of_class() {
        let h = flat();
        let mut store = WindowStore::empty(&h, cfg(3));
        store.push_example(&ex(0, 0.0, false));
        assert_eq!(store.pair(&id("a")).unwrap().w_cur.len(), 1);
        store.push_example(&ex(1, 0.0, false));
        store.push_example(&ex(2, 0.0, true));
        store.push_example(&ex(3, 0.0, false));
        let w = &store.pair(&id("a")).unwrap().w_cur;
        let uids: Vec<u64> = w.entries().iter().map(|e| e.uid).collect();
        assert_eq!(uids, vec![1, 2, 3]);

        let mut store = WindowStore::empty(&h, cfg(3));
        for i in 0..4 {
            store.push_example(&ex(i, 0.0, true));
        }
        let uids: Vec<u64> = store
            .pair(&id("a"))
            .unwrap()
            .w_cur
            .entries()
            .iter()
            .map(|e| e.uid)
            .collect();
        assert_eq!(uids, vec![1, 2, 3]);
    }

    #[test]
    fn borrowed_capacity_is_returned() {
        let h = flat();
        let mut store = WindowStore::empty(&h, cfg(3));
        for i in 0..3 {
            store.push_example(&ex(i, 0.0, true));
        }
        // a negative arrives: positives are over their cap of 1
        store.push_example(&ex(3, 0.0, false));
        let w = &store.pair(&id("a")).unwrap().w_cur;
        assert_eq!((w.count(true), w.count(false)), (2, 1));
    }

    #[test]
    fn swap_semantics() {
        let h = flat();
        let mut store = WindowStore::empty(&h, cfg(5));
        store.push_example(&ex(0, 0.0, true));
        store.push_example(&ex(1, 0.0, false));
        store.swap_to_past(&id("a")).unwrap();
        let pair = store.pair(&id("a")).unwrap();
        assert_eq!(pair.w_old.len(), 2);
        assert!(pair.w_cur.is_empty());
        store.swap_to_past(&id("a")).unwrap();
        let pair = store.pair(&id("a")).unwrap();
        assert!(pair.w_old.is_empty() && pair.w_cur.is_empty());
        assert!(store.swap_to_past(&id("zz")).is_err());
    }

    #[test]
    fn knn_majority_and_recency() {
        let h = flat();
        let mut store = WindowStore::empty(&h, cfg(10));
        store.push_example(&ex(0, 0.0, true));
        store.push_example(&ex(1, 0.1, true));
        store.push_example(&ex(2, 0.2, false));
        store.push_example(&ex(3, 5.0, false));
        let k3 = ClassifierConfig::new(3).unwrap();
        assert!(predict(&[0.0], &store, &h, &k3).unwrap().get(&id("a")));
        let k1 = ClassifierConfig::new(1).unwrap();
        assert!(!predict(&[5.0], &store, &h, &k1).unwrap().get(&id("a")));

        // equal distance: the newer example wins
        let mut store = WindowStore::empty(&h, cfg(10));
        store.push_example(&ex(0, 1.0, true));
        store.push_example(&ex(1, 1.0, false));
        assert!(!predict(&[1.0], &store, &h, &k1).unwrap().get(&id("a")));
    }

    #[test]
    fn ties_vote_negative() {
        let h = flat();
        let mut store = WindowStore::empty(&h, cfg(10));
        store.push_example(&ex(0, 0.0, true));
        store.push_example(&ex(1, 0.0, false));
        let k = ClassifierConfig::new(3).unwrap();
        assert!(!predict(&[0.0], &store, &h, &k).unwrap().get(&id("a")));
    }

    #[test]
    fn predict_applies_closure() {
        let h = ConceptHierarchy::new("root", "root")
            .add_concept("p", "p", &[id("root")])
            .unwrap()
            .add_concept("c", "c", &[id("p")])
            .unwrap();
        let mut store = WindowStore::empty(&h, cfg(10));
        let mut y = LabelVector::new();
        y.set(id("c"), true);
        y.set(id("p"), false); // inconsistent on purpose
        store.push_example(&Example {
            uid: 0,
            t: 0,
            x: vec![0.0].into(),
            y,
        });
        let out = predict(&[0.0], &store, &h, &ClassifierConfig::new(1).unwrap()).unwrap();
        assert!(out.get(&id("c")) && out.get(&id("p")) && out.get(&id("root")));
    }

    #[test]
    fn predict_falls_back_to_past_window() {
        let h = flat();
        let s1 = vec![ex(0, 0.0, true)];
        let store = init_windows(&s1, &h, cfg(3)).unwrap();
        let k = ClassifierConfig::new(1).unwrap();
        assert!(predict(&[0.0], &store, &h, &k).unwrap().get(&id("a")));
        let empty = WindowStore::empty(&h, cfg(3));
        assert!(matches!(predict(&[0.0], &empty, &h, &k), Err(Error::NoExamples)));
    }

    #[test]
    fn capacity_change_evicts() {
        let mut pair = WindowPair::new(id("a"), &cfg(6));
        for i in 0..6 {
            pair.push_current(ex(i, 0.0, i % 2 == 0).restrict(&id("a")));
        }
        pair.set_capacity(3);
        assert_eq!(pair.w_cur.len(), 3);
    }

    #[test]
    fn sliding_window_votes_jointly() {
        let h = flat();
        let mut w = SlidingWindow::new(2);
        w.push(ex(0, 0.0, true));
        w.push(ex(1, 0.0, true));
        w.push(ex(2, 9.0, false));
        assert_eq!(w.len(), 2);
        let k1 = ClassifierConfig::new(1).unwrap();
        assert!(w.predict(&[0.0], &h, &k1).unwrap().get(&id("a")));
        assert!(!w.predict(&[9.0], &h, &k1).unwrap().get(&id("a")));
    }
}
