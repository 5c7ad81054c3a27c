//! Ground-truth streams with scripted knowledge drift.
//!
//! A [`GroundTruth`] owns a pool of instances, the current hierarchy and a
//! membership rule per concept. Labels of an instance are the closure of
//! its own memberships under the current hierarchy, so every emitted label
//! vector is consistent by construction. The pool is either the 64
//! instances of HSTAGGER or the rows of a pre-embedded data set.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use log::warn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::disambiguation::KdEdit;
use crate::error::{Error, Result};
use crate::hierarchy::{ConceptHierarchy, ConceptId, HierarchyError, LabelVector};
use crate::windows::Example;

/// Independent random streams derived from one seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RngTag {
    Stream = 1,
    Holdout = 2,
    Schedule = 3,
    Generator = 4,
}

/// Deterministic generator for `(seed, tag, index)`.
pub fn rng_for(seed: u64, tag: RngTag, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((index << 8) | tag as u64);
    rng
}

pub const ATTRIBUTES: [(&str, [&str; 4]); 3] = [
    ("size", ["small", "medium", "large", "huge"]),
    ("color", ["red", "green", "blue", "yellow"]),
    ("weight", ["light", "moderate", "heavy", "dense"]),
];

const N_VALUES: usize = 4;

/// One HSTAGGER object: a value index per attribute.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Instance(pub [u8; 3]);

impl Instance {
    pub fn all() -> impl Iterator<Item = Instance> {
        (0..64).map(Instance::from_index)
    }

    pub fn from_index(i: usize) -> Instance {
        let i = (i % 64) as u8;
        Instance([i / 16, (i / 4) % 4, i % 4])
    }

    pub fn index(&self) -> usize {
        self.0[0] as usize * 16 + self.0[1] as usize * 4 + self.0[2] as usize
    }

    /// One-hot encoding, 4 slots per attribute.
    pub fn features(&self) -> Vec<f64> {
        let mut x = vec![0.0; ATTRIBUTES.len() * N_VALUES];
        for (a, &v) in self.0.iter().enumerate() {
            x[a * N_VALUES + v as usize] = 1.0;
        }
        x
    }
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self
            .0
            .iter()
            .enumerate()
            .map(|(a, &v)| ATTRIBUTES[a].1[v as usize])
            .collect();
        write!(f, "({})", names.join(", "))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Atom {
    pub attr: u8,
    pub value: u8,
}

impl Atom {
    fn holds(&self, inst: &Instance) -> bool {
        inst.0[self.attr as usize] == self.value
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (name, values) = ATTRIBUTES[self.attr as usize];
        write!(f, "{name}={}", values[self.value as usize])
    }
}

impl FromStr for Atom {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Generator(format!("bad atom {s:?}, expected attribute=value"));
        let (name, value) = s.trim().split_once('=').ok_or_else(bad)?;
        let attr = ATTRIBUTES.iter().position(|(n, _)| *n == name.trim()).ok_or_else(bad)?;
        let value = ATTRIBUTES[attr]
            .1
            .iter()
            .position(|v| *v == value.trim())
            .ok_or_else(bad)?;
        Ok(Atom {
            attr: attr as u8,
            value: value as u8,
        })
    }
}

/// A formula in disjunctive normal form over attribute-value atoms, written
/// as `size=small & color=green | size=small & color=red`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Rule {
    clauses: Vec<Vec<Atom>>,
}

impl Rule {
    pub fn new(clauses: Vec<Vec<Atom>>) -> Result<Self> {
        if clauses.is_empty() || clauses.iter().any(|c| c.is_empty()) {
            return Err(Error::Generator("a rule needs at least one nonempty clause".into()));
        }
        Ok(Rule { clauses })
    }

    pub fn clauses(&self) -> &[Vec<Atom>] {
        &self.clauses
    }

    pub fn eval(&self, inst: &Instance) -> bool {
        self.clauses.iter().any(|c| c.iter().all(|a| a.holds(inst)))
    }

    pub fn positive_rate(&self) -> f64 {
        Instance::all().filter(|i| self.eval(i)).count() as f64 / 64.0
    }

    /// Fraction of the instance space on which the two rules disagree.
    pub fn disagreement(&self, other: &Rule) -> f64 {
        Instance::all().filter(|i| self.eval(i) != other.eval(i)).count() as f64 / 64.0
    }

    /// Up to two clauses of up to two atoms on distinct attributes.
    pub fn random(rng: &mut impl Rng) -> Rule {
        let n_clauses = rng.gen_range(1..=2);
        let clauses = (0..n_clauses)
            .map(|_| {
                let n_atoms = rng.gen_range(1..=2);
                let mut attrs = [0u8, 1, 2];
                attrs.shuffle(rng);
                let mut clause: Vec<Atom> = attrs[..n_atoms]
                    .iter()
                    .map(|&attr| Atom {
                        attr,
                        value: rng.gen_range(0..N_VALUES as u8),
                    })
                    .collect();
                clause.sort();
                clause
            })
            .collect();
        Rule { clauses }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let clauses: Vec<String> = self
            .clauses
            .iter()
            .map(|c| c.iter().map(Atom::to_string).collect::<Vec<_>>().join(" & "))
            .collect();
        f.write_str(&clauses.join(" | "))
    }
}

impl FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let clauses = s
            .split('|')
            .map(|c| c.split('&').map(str::parse).collect::<Result<Vec<Atom>>>())
            .collect::<Result<Vec<_>>>()?;
        Rule::new(clauses)
    }
}

impl TryFrom<String> for Rule {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Rule> for String {
    fn from(r: Rule) -> String {
        r.to_string()
    }
}

/// How an instance's own membership in a concept is decided.
#[derive(Clone, Debug, PartialEq)]
pub enum Membership {
    Rule(Rule),
    /// Row indices that are members, for data-set pools.
    Rows(BTreeSet<usize>),
}

impl Membership {
    fn holds(&self, pool: &Pool, idx: usize) -> bool {
        match (self, pool) {
            (Membership::Rule(r), Pool::Hstagger) => r.eval(&Instance::from_index(idx)),
            (Membership::Rows(rows), _) => rows.contains(&idx),
            (Membership::Rule(_), Pool::Rows(_)) => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Pool {
    Hstagger,
    Rows(Vec<Arc<[f64]>>),
}

/// A ground-truth event, as reported to the oracle.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KdEvent {
    pub iteration: usize,
    #[serde(flatten)]
    pub kind: KdEventKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KdEventKind {
    Edit(KdEdit),
    ConceptAddition(ConceptAddition),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename = "concept_addition")]
pub struct ConceptAddition {
    pub concept: ConceptId,
    pub parents: Vec<ConceptId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub hierarchy: ConceptHierarchy,
    pub membership: BTreeMap<ConceptId, Membership>,
    pub event_log: Vec<KdEvent>,
    pool: Pool,
}

impl GroundTruth {
    pub fn dim(&self) -> usize {
        match &self.pool {
            Pool::Hstagger => ATTRIBUTES.len() * N_VALUES,
            Pool::Rows(rows) => rows.first().map_or(0, |r| r.len()),
        }
    }

    /// Number of instances in the pool.
    pub fn pool_size(&self) -> usize {
        match &self.pool {
            Pool::Hstagger => 64,
            Pool::Rows(rows) => rows.len(),
        }
    }

    pub fn features(&self, idx: usize) -> Arc<[f64]> {
        match &self.pool {
            Pool::Hstagger => Instance::from_index(idx).features().into(),
            Pool::Rows(rows) => rows[idx].clone(),
        }
    }

    fn own(&self, idx: usize) -> LabelVector {
        self.hierarchy
            .non_root_concepts()
            .map(|c| {
                let m = self.membership.get(c).is_some_and(|m| m.holds(&self.pool, idx));
                (c.clone(), m)
            })
            .collect()
    }

    /// Labels of pool instance `idx` under the current hierarchy.
    pub fn labels(&self, idx: usize) -> LabelVector {
        let mut y = self
            .hierarchy
            .closure(&self.own(idx))
            .expect("own labels use known concepts");
        y.set(self.hierarchy.root().clone(), true);
        y
    }

    /// Stream example number `index` (S1 included) under `seed`. Pure in
    /// the ground-truth state, `seed` and `index`.
    pub fn next_example(&self, index: usize, seed: u64) -> Example {
        let idx = rng_for(seed, RngTag::Stream, index as u64).gen_range(0..self.pool_size());
        Example {
            uid: index as u64,
            t: index,
            x: self.features(idx),
            y: self.labels(idx),
        }
    }

    pub fn rule(&self, c: &ConceptId) -> Option<&Rule> {
        match self.membership.get(c) {
            Some(Membership::Rule(r)) => Some(r),
            _ => None,
        }
    }

    /// Instances that are in `j` but not in `i`, i.e. the labels of `i` a
    /// new `j -> i` edge would flip.
    fn relation_effect(&self, j: &ConceptId, i: &ConceptId) -> usize {
        (0..self.pool_size())
            .filter(|&idx| {
                let y = self.labels(idx);
                y.get(j) && !y.get(i)
            })
            .count()
    }

    /// Applies a resolved change and records it in the event log.
    pub fn apply(&mut self, iteration: usize, change: &TruthChange) -> Result<()> {
        let event = match change {
            TruthChange::Drift { concept, membership } => {
                if !self.hierarchy.contains(concept) || concept == self.hierarchy.root() {
                    return Err(HierarchyError::UnknownConcept(concept.clone()).into());
                }
                self.membership.insert(concept.clone(), membership.clone());
                KdEventKind::Edit(KdEdit::concept_drift(concept.clone()))
            }
            TruthChange::Edit(edit) => {
                self.hierarchy = match edit {
                    KdEdit::ConceptRemoval { concept } => {
                        let h = self.hierarchy.remove_concept(concept)?;
                        self.membership.remove(concept);
                        h
                    }
                    KdEdit::RelationAddition { child, parent } => self.hierarchy.add_relation(child, parent)?,
                    KdEdit::RelationRemoval { child, parent } => self.hierarchy.remove_relation(child, parent)?,
                    KdEdit::ConceptDrift { .. } => {
                        return Err(Error::Generator("concept drift needs a new membership".into()))
                    }
                };
                KdEventKind::Edit(edit.clone())
            }
            TruthChange::Addition {
                concept,
                parents,
                membership,
            } => {
                self.hierarchy = self.hierarchy.add_concept(concept.clone(), concept.as_str(), parents)?;
                self.membership.insert(concept.clone(), membership.clone());
                KdEventKind::ConceptAddition(ConceptAddition {
                    concept: concept.clone(),
                    parents: parents.clone(),
                })
            }
        };
        if self.event_log.last().is_some_and(|e| e.iteration > iteration) {
            return Err(Error::Generator("events must be applied in time order".into()));
        }
        self.event_log.push(KdEvent { iteration, kind: event });
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HstaggerConfig {
    pub n_attributes: usize,
    pub values_per_attribute: usize,
    pub n_leaf_concepts: usize,
    pub seed: u64,
    pub pos_ratio_band: (f64, f64),
    /// A drifted rule must disagree with the old one on at least this
    /// fraction of the instance space. Randomly chosen relation additions
    /// must flip at least this fraction of the parent's labels when
    /// possible.
    pub min_drift_change: f64,
    /// A drifted rule must also move the positive rate by at least this much.
    pub min_rate_shift: f64,
}

impl Default for HstaggerConfig {
    fn default() -> Self {
        HstaggerConfig {
            n_attributes: 3,
            values_per_attribute: 4,
            n_leaf_concepts: 5,
            seed: 0,
            pos_ratio_band: (0.25, 0.75),
            min_drift_change: 0.25,
            min_rate_shift: 0.15,
        }
    }
}

const MAX_ATTEMPTS: usize = 10_000;

impl HstaggerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_attributes != ATTRIBUTES.len() || self.values_per_attribute != N_VALUES {
            return Err(Error::Config(format!(
                "the attribute space is fixed at {} attributes with {} values",
                ATTRIBUTES.len(),
                N_VALUES
            )));
        }
        if self.n_leaf_concepts < 2 {
            return Err(Error::Config("at least two leaf concepts are needed".into()));
        }
        let (lo, hi) = self.pos_ratio_band;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return Err(Error::Config(format!("bad positive-rate band [{lo}, {hi}]")));
        }
        if !(0.0..=1.0).contains(&self.min_drift_change) {
            return Err(Error::Config("min_drift_change must lie in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.min_rate_shift) || self.min_rate_shift > hi - lo {
            return Err(Error::Config("min_rate_shift must lie in [0, band width]".into()));
        }
        Ok(())
    }

    fn in_band(&self, r: &Rule) -> bool {
        let p = r.positive_rate();
        p >= self.pos_ratio_band.0 && p <= self.pos_ratio_band.1
    }

    /// Rejection-samples a rule inside the band that differs from `from`
    /// (if given) on at least `min_drift_change` of the instances and whose
    /// positive rate is at least `min_rate_shift` away from it.
    pub fn sample_rule(&self, rng: &mut impl Rng, from: Option<&Rule>) -> Result<Rule> {
        for _ in 0..MAX_ATTEMPTS {
            let r = Rule::random(rng);
            let far_enough = from.is_none_or(|old| {
                r.disagreement(old) >= self.min_drift_change
                    && (r.positive_rate() - old.positive_rate()).abs() >= self.min_rate_shift
            });
            if self.in_band(&r) && far_enough {
                return Ok(r);
            }
        }
        Err(Error::Generator(format!(
            "no rule found within {MAX_ATTEMPTS} attempts; band {:?} is infeasible",
            self.pos_ratio_band
        )))
    }
}

pub fn leaf_id(i: usize) -> ConceptId {
    ConceptId::new(format!("c{}", i + 1))
}

pub const PARENT_ID: &str = "p";
pub const ROOT_ID: &str = "root";

/// Root, one parent over the first two leaves, remaining leaves under root.
/// The parent has no rule of its own: its label is the union of its
/// children.
pub fn hstagger_generate(cfg: &HstaggerConfig) -> Result<GroundTruth> {
    cfg.validate()?;
    let mut rng = rng_for(cfg.seed, RngTag::Generator, 0);
    let root = ConceptId::from(ROOT_ID);
    let parent = ConceptId::from(PARENT_ID);
    let mut h = ConceptHierarchy::new(ROOT_ID, "root").add_concept(PARENT_ID, "parent", std::slice::from_ref(&root))?;
    let mut membership = BTreeMap::new();
    for i in 0..cfg.n_leaf_concepts {
        let rule = cfg.sample_rule(&mut rng, None)?;
        let under = if i < 2 { &parent } else { &root };
        h = h.add_concept(leaf_id(i), rule.to_string(), std::slice::from_ref(under))?;
        membership.insert(leaf_id(i), Membership::Rule(rule));
    }
    Ok(GroundTruth {
        hierarchy: h,
        membership,
        event_log: Vec::new(),
        pool: Pool::Hstagger,
    })
}

/// A pre-embedded data set with a hierarchy.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub examples: Vec<Example>,
    pub hierarchy: ConceptHierarchy,
    /// Rows whose labels had to be closed upward.
    pub repaired: usize,
}

impl Dataset {
    pub fn dim(&self) -> usize {
        self.examples.first().map_or(0, |z| z.x.len())
    }

    /// Turns the rows into a ground-truth pool. A row's own memberships are
    /// its positives that are not explained by a positive child.
    pub fn into_ground_truth(self) -> GroundTruth {
        let mut membership: BTreeMap<ConceptId, BTreeSet<usize>> = self
            .hierarchy
            .non_root_concepts()
            .map(|c| (c.clone(), BTreeSet::new()))
            .collect();
        for (idx, z) in self.examples.iter().enumerate() {
            for c in z.y.positives() {
                if *c == *self.hierarchy.root() {
                    continue;
                }
                let explained = self.hierarchy.children(c).iter().any(|ch| z.y.get(ch));
                if !explained {
                    membership.get_mut(c).expect("labels validated").insert(idx);
                }
            }
        }
        GroundTruth {
            hierarchy: self.hierarchy,
            membership: membership.into_iter().map(|(c, r)| (c, Membership::Rows(r))).collect(),
            event_log: Vec::new(),
            pool: Pool::Rows(self.examples.into_iter().map(|z| z.x).collect()),
        }
    }
}

const LABEL_PREFIX: &str = "y_";
const FEATURE_PREFIX: &str = "f";

/// Reads a CSV with header `f0,...,f{d-1},y_<concept>,...` and its hierarchy
/// JSON. Missing label columns read as 0; the root is always positive.
/// Rows violating the hierarchy are closed upward when `repair` is set and
/// rejected otherwise.
pub fn load_dataset(csv_path: &Path, hierarchy_path: &Path, repair: bool) -> Result<Dataset> {
    let hierarchy: ConceptHierarchy = serde_json::from_reader(std::fs::File::open(hierarchy_path)?)?;
    read_dataset(std::fs::File::open(csv_path)?, hierarchy, repair)
}

pub fn read_dataset(reader: impl Read, hierarchy: ConceptHierarchy, repair: bool) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    let header_err = |msg: String| Error::Dataset { line: 1, msg };
    if header.is_empty() || header.iter().all(str::is_empty) {
        return Err(header_err("empty file".into()));
    }
    let mut dim = 0;
    let mut labels = Vec::new();
    for (col, name) in header.iter().enumerate() {
        if let Some(c) = name.strip_prefix(LABEL_PREFIX) {
            let c = ConceptId::from(c);
            if !hierarchy.contains(&c) {
                return Err(header_err(format!("label column {name} names an unknown concept")));
            }
            labels.push((col, c));
        } else if name == format!("{FEATURE_PREFIX}{dim}") && labels.is_empty() {
            dim += 1;
        } else {
            return Err(header_err(format!("unexpected column {name:?}")));
        }
    }
    if dim == 0 {
        return Err(header_err("no feature columns".into()));
    }

    let mut examples = Vec::new();
    let mut repaired = 0;
    for (row, record) in rdr.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| Error::Dataset {
            line,
            msg: e.to_string(),
        })?;
        if record.len() != header.len() {
            return Err(Error::Dataset {
                line,
                msg: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let x = (0..dim)
            .map(|i| {
                record[i].parse::<f64>().map_err(|e| Error::Dataset {
                    line,
                    msg: format!("feature f{i}: {e}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let mut y: LabelVector = hierarchy.concepts().map(|c| (c.clone(), false)).collect();
        for (col, c) in &labels {
            let v = match &record[*col] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::Dataset {
                        line,
                        msg: format!("label {c} must be 0 or 1, got {other:?}"),
                    })
                }
            };
            y.set(c.clone(), v);
        }
        y.set(hierarchy.root().clone(), true);
        if !hierarchy.is_consistent(&y)? {
            if !repair {
                return Err(Error::Dataset {
                    line,
                    msg: "labels violate the hierarchy".into(),
                });
            }
            y = hierarchy.closure(&y)?;
            repaired += 1;
        }
        let uid = examples.len();
        examples.push(Example {
            uid: uid as u64,
            t: uid,
            x: x.into(),
            y,
        });
    }
    if examples.is_empty() {
        return Err(Error::Dataset {
            line: 1,
            msg: "no data rows".into(),
        });
    }
    if repaired > 0 {
        warn!("{repaired} rows had inconsistent labels and were closed upward");
    }
    Ok(Dataset {
        examples,
        hierarchy,
        repaired,
    })
}

pub fn write_dataset(examples: &[Example], h: &ConceptHierarchy, out: impl Write) -> Result<()> {
    let dim = examples.first().map_or(0, |z| z.x.len());
    let concepts: Vec<&ConceptId> = h.non_root_concepts().collect();
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<String> = (0..dim)
        .map(|i| format!("{FEATURE_PREFIX}{i}"))
        .chain(concepts.iter().map(|c| format!("{LABEL_PREFIX}{c}")))
        .collect();
    w.write_record(&header)?;
    for z in examples {
        let row: Vec<String> =
            z.x.iter()
                .map(f64::to_string)
                .chain(concepts.iter().map(|c| u8::from(z.y.get(c)).to_string()))
                .collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Which kind of knowledge drift a scheduled event injects.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftKind {
    ConceptDrift,
    ConceptRemoval,
    RelationAddition,
    RelationRemoval,
    ConceptAddition,
}

/// Explicit targets. Fields left out are drawn at random under the seed.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventArgs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concept: Option<ConceptId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub child: Option<ConceptId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<ConceptId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parents: Option<Vec<ConceptId>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<Rule>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledEvent {
    pub t: usize,
    pub kind: DriftKind,
    #[serde(default)]
    pub args: EventArgs,
}

impl ScheduledEvent {
    pub fn random(t: usize, kind: DriftKind) -> Self {
        ScheduledEvent {
            t,
            kind,
            args: EventArgs::default(),
        }
    }
}

/// A JSON list of `{"t", "kind", "args"}` objects.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DriftSchedule {
    pub events: Vec<ScheduledEvent>,
}

/// A fully determined ground-truth mutation.
#[derive(Clone, Debug, PartialEq)]
pub enum TruthChange {
    Drift {
        concept: ConceptId,
        membership: Membership,
    },
    Edit(KdEdit),
    Addition {
        concept: ConceptId,
        parents: Vec<ConceptId>,
        membership: Membership,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlannedEvent {
    pub t: usize,
    pub change: TruthChange,
}

impl DriftSchedule {
    pub fn new(events: Vec<ScheduledEvent>) -> Self {
        DriftSchedule { events }
    }

    /// Concept drift, relation addition, relation removal, concept removal,
    /// starting at `start` and `gap` iterations apart.
    pub fn sequential(start: usize, gap: usize) -> Self {
        let kinds = [
            DriftKind::ConceptDrift,
            DriftKind::RelationAddition,
            DriftKind::RelationRemoval,
            DriftKind::ConceptRemoval,
        ];
        DriftSchedule::new(
            kinds
                .iter()
                .enumerate()
                .map(|(i, &k)| ScheduledEvent::random(start + i * gap, k))
                .collect(),
        )
    }

    pub fn single(t: usize, kind: DriftKind) -> Self {
        DriftSchedule::new(vec![ScheduledEvent::random(t, kind)])
    }

    pub fn validate(&self, iterations: usize) -> Result<()> {
        for pair in self.events.windows(2) {
            if pair[1].t < pair[0].t {
                return Err(Error::Config("schedule iterations must be nondecreasing".into()));
            }
        }
        if let Some(e) = self.events.iter().find(|e| e.t >= iterations) {
            return Err(Error::Config(format!(
                "event at t={} lies beyond the stream ({iterations} iterations)",
                e.t
            )));
        }
        Ok(())
    }

    /// Resolves random targets against a copy of the ground truth, applying
    /// each event in turn so later targets see earlier changes. Events at
    /// the same iteration keep their list order.
    pub fn resolve(&self, gt: &GroundTruth, hcfg: &HstaggerConfig, seed: u64) -> Result<Vec<PlannedEvent>> {
        let mut scratch = gt.clone();
        let mut plan = Vec::with_capacity(self.events.len());
        for (n, ev) in self.events.iter().enumerate() {
            let mut rng = rng_for(seed, RngTag::Schedule, n as u64);
            let change = resolve_event(ev, &scratch, hcfg, &mut rng)
                .map_err(|e| Error::Generator(format!("cannot resolve {:?} at t={}: {e}", ev.kind, ev.t)))?;
            scratch.apply(ev.t, &change)?;
            plan.push(PlannedEvent { t: ev.t, change });
        }
        Ok(plan)
    }
}

fn pick<'a, T>(rng: &mut impl Rng, items: &'a [T], what: &str) -> Result<&'a T> {
    items
        .choose(rng)
        .ok_or_else(|| Error::Generator(format!("no feasible {what}")))
}

fn resolve_event(
    ev: &ScheduledEvent,
    gt: &GroundTruth,
    hcfg: &HstaggerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<TruthChange> {
    let h = &gt.hierarchy;
    let root = h.root();
    let non_root: Vec<ConceptId> = h.non_root_concepts().cloned().collect();
    let change = match ev.kind {
        DriftKind::ConceptDrift => {
            let concept = match &ev.args.concept {
                Some(c) => c.clone(),
                None => {
                    let drifting: Vec<ConceptId> = non_root
                        .iter()
                        .filter(|c| gt.membership.contains_key(*c))
                        .cloned()
                        .collect();
                    pick(rng, &drifting, "drifting concept")?.clone()
                }
            };
            let membership = match (&ev.args.rule, gt.membership.get(&concept)) {
                (Some(rule), _) => Membership::Rule(rule.clone()),
                (None, Some(Membership::Rule(old))) => Membership::Rule(hcfg.sample_rule(rng, Some(old))?),
                (None, Some(Membership::Rows(rows))) => Membership::Rows(flip_half(gt, rows, rng)),
                (None, None) => return Err(Error::Generator(format!("{concept} has no membership rule to drift"))),
            };
            TruthChange::Drift { concept, membership }
        }
        DriftKind::ConceptRemoval => {
            let concept = match &ev.args.concept {
                Some(c) => c.clone(),
                None => pick(rng, &non_root, "concept to remove")?.clone(),
            };
            TruthChange::Edit(KdEdit::ConceptRemoval { concept })
        }
        DriftKind::RelationAddition => {
            let (child, parent) = match (&ev.args.child, &ev.args.parent) {
                (Some(j), Some(i)) => (j.clone(), i.clone()),
                _ => {
                    let mut cands = Vec::new();
                    let mut best = 0;
                    for j in &non_root {
                        let above = h.ancestors(j)?;
                        for i in &non_root {
                            if i == j || above.contains(i) || h.add_relation(j, i).is_err() {
                                continue;
                            }
                            let effect = gt.relation_effect(j, i);
                            best = best.max(effect);
                            if effect > 0 {
                                cands.push((effect, j.clone(), i.clone()));
                            }
                        }
                    }
                    // Prefer edges that flip a sizeable share of labels; if
                    // none does, take the strongest ones available.
                    let needed = ((hcfg.min_drift_change * gt.pool_size() as f64).ceil() as usize).min(best);
                    let cands: Vec<(ConceptId, ConceptId)> = cands
                        .into_iter()
                        .filter(|(e, _, _)| *e >= needed.max(1))
                        .map(|(_, j, i)| (j, i))
                        .collect();
                    pick(rng, &cands, "relation to add")?.clone()
                }
            };
            TruthChange::Edit(KdEdit::RelationAddition { child, parent })
        }
        DriftKind::RelationRemoval => {
            let (child, parent) = match (&ev.args.child, &ev.args.parent) {
                (Some(j), Some(i)) => (j.clone(), i.clone()),
                _ => {
                    let cands: Vec<(ConceptId, ConceptId)> = h
                        .edges()
                        .filter(|(_, p)| *p != root)
                        .map(|(c, p)| (c.clone(), p.clone()))
                        .collect();
                    pick(rng, &cands, "relation to remove")?.clone()
                }
            };
            TruthChange::Edit(KdEdit::RelationRemoval { child, parent })
        }
        DriftKind::ConceptAddition => {
            let concept = ev.args.concept.clone().unwrap_or_else(|| {
                let mut n = non_root.len();
                loop {
                    let c = ConceptId::new(format!("c{}", n + 1));
                    if !h.contains(&c) {
                        break c;
                    }
                    n += 1;
                }
            });
            let parents = ev.args.parents.clone().unwrap_or_else(|| vec![root.clone()]);
            let membership = match (&ev.args.rule, &gt.pool) {
                (Some(rule), _) => Membership::Rule(rule.clone()),
                (None, Pool::Hstagger) => Membership::Rule(hcfg.sample_rule(rng, None)?),
                (None, Pool::Rows(_)) => {
                    return Err(Error::Generator("concept addition on a data set needs a rule".into()))
                }
            };
            TruthChange::Addition {
                concept,
                parents,
                membership,
            }
        }
    };
    Ok(change)
}

/// Inverts membership on the rows above the median of a random feature.
fn flip_half(gt: &GroundTruth, rows: &BTreeSet<usize>, rng: &mut impl Rng) -> BTreeSet<usize> {
    let n = gt.pool_size();
    let k = rng.gen_range(0..gt.dim().max(1));
    let mut values: Vec<f64> = (0..n).map(|i| gt.features(i)[k]).collect();
    values.sort_by(f64::total_cmp);
    let median = values[n / 2];
    (0..n)
        .filter(|&i| rows.contains(&i) != (gt.features(i)[k] >= median))
        .collect()
}

/// A ground truth that mutates along a resolved plan.
#[derive(Clone, Debug)]
pub struct DriftStream {
    gt: GroundTruth,
    plan: Vec<PlannedEvent>,
    applied: usize,
    seed: u64,
}

impl DriftStream {
    pub fn new(gt: GroundTruth, plan: Vec<PlannedEvent>, seed: u64) -> Self {
        DriftStream {
            gt,
            plan,
            applied: 0,
            seed,
        }
    }

    pub fn truth(&self) -> &GroundTruth {
        &self.gt
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn plan(&self) -> &[PlannedEvent] {
        &self.plan
    }

    /// Applies every planned event with `t <= iteration` and returns the new
    /// log entries.
    pub fn advance_to(&mut self, iteration: usize) -> Result<Vec<KdEvent>> {
        let before = self.gt.event_log.len();
        while let Some(ev) = self.plan.get(self.applied).filter(|e| e.t <= iteration) {
            self.gt.apply(ev.t, &ev.change)?;
            self.applied += 1;
        }
        Ok(self.gt.event_log[before..].to_vec())
    }

    pub fn example(&self, index: usize) -> Example {
        self.gt.next_example(index, self.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> ConceptId {
        ConceptId::from(s)
    }

    #[test]
    fn instance_space() {
        let all: Vec<_> = Instance::all().collect();
        assert_eq!(all.len(), 64);
        assert_eq!(all.iter().collect::<BTreeSet<_>>().len(), 64);
        for (i, inst) in all.iter().enumerate() {
            assert_eq!(inst.index(), i);
            let x = inst.features();
            assert_eq!(x.len(), 12);
            assert_eq!(x.iter().sum::<f64>(), 3.0);
        }
    }

    #[test]
    fn rule_parse_and_eval() {
        let r: Rule = "size=small & color=green | size=small & color=red".parse().unwrap();
        let inst = Instance([0, 1, 2]); // small, green, heavy
        assert_eq!(inst.to_string(), "(small, green, heavy)");
        assert!(r.eval(&inst));
        assert!(!r.eval(&Instance([1, 1, 2])));
        assert_eq!(r.positive_rate(), 8.0 / 64.0);
        assert_eq!(r.to_string().parse::<Rule>().unwrap(), r);
        assert!("size=tiny".parse::<Rule>().is_err());
        assert!("".parse::<Rule>().is_err());
    }

    #[test]
    fn generator_shape_and_band() {
        let cfg = HstaggerConfig::default();
        let gt = hstagger_generate(&cfg).unwrap();
        assert_eq!(gt.hierarchy.len(), 7);
        assert!(gt.hierarchy.has_edge(&leaf_id(0), &id(PARENT_ID)));
        assert!(gt.hierarchy.has_edge(&leaf_id(4), &id(ROOT_ID)));
        for i in 0..5 {
            let p = gt.rule(&leaf_id(i)).unwrap().positive_rate();
            assert!((0.25..=0.75).contains(&p));
        }
        assert!(gt.rule(&id(PARENT_ID)).is_none());
        for idx in 0..64 {
            let y = gt.labels(idx);
            assert!(gt.hierarchy.is_consistent(&y).unwrap());
            assert!(y.get(&id(ROOT_ID)));
            assert_eq!(y.get(&id(PARENT_ID)), y.get(&leaf_id(0)) || y.get(&leaf_id(1)));
        }
    }

    #[test]
    fn infeasible_band() {
        let cfg = HstaggerConfig {
            pos_ratio_band: (0.99, 1.0),
            min_rate_shift: 0.0,
            ..Default::default()
        };
        assert!(matches!(hstagger_generate(&cfg), Err(Error::Generator(_))));
    }

    #[test]
    fn stream_is_reproducible() {
        let gt = hstagger_generate(&HstaggerConfig::default()).unwrap();
        let a: Vec<_> = (0..20).map(|i| gt.next_example(i, 7)).collect();
        let b: Vec<_> = (0..20).map(|i| gt.next_example(i, 7)).collect();
        assert_eq!(a, b);
        let c: Vec<_> = (0..20).map(|i| gt.next_example(i, 8)).collect();
        assert_ne!(a, c);
    }

    #[test]
    fn schedule_json() {
        let json = r#"[{"t":100,"kind":"relation_addition","args":{"child":"c3","parent":"c4"}},
                       {"t":200,"kind":"concept_removal"}]"#;
        let s: DriftSchedule = serde_json::from_str(json).unwrap();
        assert_eq!(s.events.len(), 2);
        assert_eq!(s.events[0].args.child, Some(id("c3")));
        assert!(s.validate(300).is_ok());
        assert!(s.validate(150).is_err());
    }

    #[test]
    fn sequential_plan_applies() {
        let hcfg = HstaggerConfig::default();
        let gt = hstagger_generate(&hcfg).unwrap();
        let plan = DriftSchedule::sequential(100, 100).resolve(&gt, &hcfg, 3).unwrap();
        assert_eq!(plan.len(), 4);
        let mut stream = DriftStream::new(gt.clone(), plan, 3);
        assert!(stream.advance_to(99).unwrap().is_empty());
        assert_eq!(stream.advance_to(100).unwrap().len(), 1);
        assert_eq!(stream.advance_to(1000).unwrap().len(), 3);
        let kinds: Vec<_> = stream.truth().event_log.iter().map(|e| e.iteration).collect();
        assert_eq!(kinds, vec![100, 200, 300, 400]);
        for i in 0..50 {
            let z = stream.example(i);
            assert!(stream.truth().hierarchy.is_consistent(&z.y).unwrap());
        }
    }

    #[test]
    fn drifted_rule_differs() {
        let hcfg = HstaggerConfig::default();
        let gt = hstagger_generate(&hcfg).unwrap();
        let plan = DriftSchedule::single(10, DriftKind::ConceptDrift)
            .resolve(&gt, &hcfg, 0)
            .unwrap();
        let TruthChange::Drift {
            concept,
            membership: Membership::Rule(r),
        } = &plan[0].change
        else {
            panic!("expected a rule drift");
        };
        assert!(r.disagreement(gt.rule(concept).unwrap()) >= 0.25);
    }

    #[test]
    fn removal_and_addition_semantics() {
        let hcfg = HstaggerConfig::default();
        let mut gt = hstagger_generate(&hcfg).unwrap();
        gt.apply(5, &TruthChange::Edit(KdEdit::relation_addition("c3", "c4")))
            .unwrap();
        for idx in 0..64 {
            let y = gt.labels(idx);
            assert!(!y.get(&id("c3")) || y.get(&id("c4")));
        }
        gt.apply(6, &TruthChange::Edit(KdEdit::concept_removal("c3"))).unwrap();
        assert!((0..64).all(|idx| !gt.labels(idx).get(&id("c3"))));
        assert!(gt.apply(1, &TruthChange::Edit(KdEdit::concept_removal("c4"))).is_err());
        assert_eq!(gt.event_log.len(), 2);
    }

    #[test]
    fn dataset_round_trip_and_repair() {
        let gt = hstagger_generate(&HstaggerConfig::default()).unwrap();
        let rows: Vec<_> = (0..30).map(|i| gt.next_example(i, 1)).collect();
        let mut buf = Vec::new();
        write_dataset(&rows, &gt.hierarchy, &mut buf).unwrap();
        let ds = read_dataset(buf.as_slice(), gt.hierarchy.clone(), false).unwrap();
        assert_eq!(ds.dim(), 12);
        assert_eq!(ds.examples.len(), 30);
        assert_eq!(ds.repaired, 0);
        for (a, b) in ds.examples.iter().zip(&rows) {
            assert_eq!(a.x, b.x);
            assert_eq!(a.y, b.y);
        }

        let h = ConceptHierarchy::new("root", "root")
            .add_concept("P", "P", &[id("root")])
            .unwrap()
            .add_concept("C", "C", &[id("P")])
            .unwrap();
        let csv = "f0,f1,y_P,y_C\n0.5,1.0,0,1\n0.1,0.2,1,0\n";
        let ds = read_dataset(csv.as_bytes(), h.clone(), true).unwrap();
        assert_eq!(ds.repaired, 1);
        assert!(ds.examples[0].y.get(&id("P")));
        assert!(read_dataset(csv.as_bytes(), h.clone(), false).is_err());

        let bad = "f0,y_P\n0.5,0\nx,1\n";
        assert!(matches!(
            read_dataset(bad.as_bytes(), h.clone(), true),
            Err(Error::Dataset { line: 3, .. })
        ));
        assert!(read_dataset("".as_bytes(), h.clone(), true).is_err());
        assert!(read_dataset("f0,y_Q\n1,0\n".as_bytes(), h, true).is_err());
    }

    #[test]
    fn dataset_pool_keeps_labels() {
        let gt = hstagger_generate(&HstaggerConfig::default()).unwrap();
        let rows: Vec<_> = (0..40).map(|i| gt.next_example(i, 2)).collect();
        let ds = Dataset {
            examples: rows.clone(),
            hierarchy: gt.hierarchy.clone(),
            repaired: 0,
        };
        let pool = ds.into_ground_truth();
        for (idx, z) in rows.iter().enumerate() {
            assert_eq!(pool.labels(idx), z.y);
        }
    }
}
