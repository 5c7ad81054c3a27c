//! Concept hierarchies: a rooted DAG of concepts linked by is-a edges.
//!
//! Values are immutable snapshots. Every mutation returns a new hierarchy
//! and is validated (acyclic, every concept reaches the root) before it is
//! handed back, so a `ConceptHierarchy` in hand is always well formed.
//!
//! Label vectors live here too because consistency is a property of a
//! labelling relative to a hierarchy: if `child is-a parent` then a positive
//! child label forces a positive parent label.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConceptId(String);

impl ConceptId {
    pub fn new(id: impl Into<String>) -> Self {
        ConceptId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ConceptId {
    fn from(s: &str) -> Self {
        ConceptId(s.to_owned())
    }
}

impl From<String> for ConceptId {
    fn from(s: String) -> Self {
        ConceptId(s)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HierarchyError {
    #[error("unknown concept `{0}`")]
    UnknownConcept(ConceptId),
    #[error("concept `{0}` already exists")]
    DuplicateConcept(ConceptId),
    #[error("the root concept cannot be removed")]
    RootRemoval,
    #[error("self edge on `{0}`")]
    SelfEdge(ConceptId),
    #[error("edge `{child}` is-a `{parent}` already exists")]
    DuplicateEdge { child: ConceptId, parent: ConceptId },
    #[error("edge `{child}` is-a `{parent}` does not exist")]
    MissingEdge { child: ConceptId, parent: ConceptId },
    #[error("edge `{child}` is-a `{parent}` would create a cycle")]
    Cycle { child: ConceptId, parent: ConceptId },
    #[error("concept `{0}` has no path to the root")]
    Unreachable(ConceptId),
    #[error("the root concept `{0}` cannot have parents")]
    RootWithParent(ConceptId),
    #[error("label vector refers to concept `{0}` which is not in the hierarchy")]
    DomainMismatch(ConceptId),
}

type HResult<T> = std::result::Result<T, HierarchyError>;

/// Indicator vector over concepts. Concepts absent from the map read as 0.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelVector(BTreeMap<ConceptId, bool>);

impl LabelVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// All concepts of `h` set to 0 except the given positives.
    pub fn from_positives<'a>(
        h: &ConceptHierarchy,
        positives: impl IntoIterator<Item = &'a ConceptId>,
    ) -> HResult<Self> {
        let mut labels: BTreeMap<_, _> = h.concepts().map(|c| (c.clone(), false)).collect();
        for c in positives {
            match labels.get_mut(c) {
                Some(v) => *v = true,
                None => return Err(HierarchyError::DomainMismatch(c.clone())),
            }
        }
        Ok(LabelVector(labels))
    }

    pub fn get(&self, c: &ConceptId) -> bool {
        self.0.get(c).copied().unwrap_or(false)
    }

    pub fn set(&mut self, c: ConceptId, value: bool) {
        self.0.insert(c, value);
    }

    pub fn remove(&mut self, c: &ConceptId) -> Option<bool> {
        self.0.remove(c)
    }

    pub fn contains(&self, c: &ConceptId) -> bool {
        self.0.contains_key(c)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ConceptId, bool)> {
        self.0.iter().map(|(c, &v)| (c, v))
    }

    pub fn concepts(&self) -> impl Iterator<Item = &ConceptId> {
        self.0.keys()
    }

    pub fn positives(&self) -> impl Iterator<Item = &ConceptId> {
        self.0.iter().filter(|(_, &v)| v).map(|(c, _)| c)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromIterator<(ConceptId, bool)> for LabelVector {
    fn from_iter<I: IntoIterator<Item = (ConceptId, bool)>>(iter: I) -> Self {
        LabelVector(iter.into_iter().collect())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "HierarchyJson", into = "HierarchyJson")]
pub struct ConceptHierarchy {
    names: BTreeMap<ConceptId, String>,
    /// (child, parent) pairs.
    edges: BTreeSet<(ConceptId, ConceptId)>,
    root: ConceptId,
    version: u64,
}

/// Structural equality; the mutation counter is ignored.
impl PartialEq for ConceptHierarchy {
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names && self.edges == other.edges && self.root == other.root
    }
}

impl Eq for ConceptHierarchy {}

impl ConceptHierarchy {
    pub fn new(root: impl Into<ConceptId>, root_name: impl Into<String>) -> Self {
        let root = root.into();
        let mut names = BTreeMap::new();
        names.insert(root.clone(), root_name.into());
        ConceptHierarchy {
            names,
            edges: BTreeSet::new(),
            root,
            version: 0,
        }
    }

    /// Builds and validates a hierarchy from raw parts.
    pub fn from_parts(
        root: ConceptId,
        concepts: impl IntoIterator<Item = (ConceptId, String)>,
        edges: impl IntoIterator<Item = (ConceptId, ConceptId)>,
    ) -> HResult<Self> {
        let mut names = BTreeMap::new();
        for (id, name) in concepts {
            if names.insert(id.clone(), name).is_some() {
                return Err(HierarchyError::DuplicateConcept(id));
            }
        }
        if !names.contains_key(&root) {
            return Err(HierarchyError::UnknownConcept(root));
        }
        let mut edge_set = BTreeSet::new();
        for (child, parent) in edges {
            for c in [&child, &parent] {
                if !names.contains_key(c) {
                    return Err(HierarchyError::UnknownConcept(c.clone()));
                }
            }
            if child == parent {
                return Err(HierarchyError::SelfEdge(child));
            }
            if !edge_set.insert((child.clone(), parent.clone())) {
                return Err(HierarchyError::DuplicateEdge { child, parent });
            }
        }
        let h = ConceptHierarchy {
            names,
            edges: edge_set,
            root,
            version: 0,
        };
        h.validate()?;
        Ok(h)
    }

    /// Returns a copy with a new concept attached below `parents`.
    pub fn add_concept(
        &self,
        id: impl Into<ConceptId>,
        name: impl Into<String>,
        parents: &[ConceptId],
    ) -> HResult<Self> {
        let id = id.into();
        if self.names.contains_key(&id) {
            return Err(HierarchyError::DuplicateConcept(id));
        }
        if parents.is_empty() {
            return Err(HierarchyError::Unreachable(id));
        }
        let mut next = self.clone();
        next.names.insert(id.clone(), name.into());
        for p in parents {
            if !self.names.contains_key(p) {
                return Err(HierarchyError::UnknownConcept(p.clone()));
            }
            if !next.edges.insert((id.clone(), p.clone())) {
                return Err(HierarchyError::DuplicateEdge {
                    child: id.clone(),
                    parent: p.clone(),
                });
            }
        }
        next.bump()
    }

    pub fn root(&self) -> &ConceptId {
        &self.root
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn contains(&self, c: &ConceptId) -> bool {
        self.names.contains_key(c)
    }

    pub fn name(&self, c: &ConceptId) -> Option<&str> {
        self.names.get(c).map(String::as_str)
    }

    pub fn concepts(&self) -> impl Iterator<Item = &ConceptId> {
        self.names.keys()
    }

    pub fn non_root_concepts(&self) -> impl Iterator<Item = &ConceptId> {
        self.names.keys().filter(move |c| **c != self.root)
    }

    pub fn edges(&self) -> impl Iterator<Item = (&ConceptId, &ConceptId)> {
        self.edges.iter().map(|(c, p)| (c, p))
    }

    pub fn has_edge(&self, child: &ConceptId, parent: &ConceptId) -> bool {
        self.edges.contains(&(child.clone(), parent.clone()))
    }

    pub fn parents(&self, c: &ConceptId) -> Vec<&ConceptId> {
        self.edges
            .iter()
            .filter(|(child, _)| child == c)
            .map(|(_, p)| p)
            .collect()
    }

    pub fn children(&self, c: &ConceptId) -> Vec<&ConceptId> {
        self.edges
            .iter()
            .filter(|(_, parent)| parent == c)
            .map(|(ch, _)| ch)
            .collect()
    }

    fn check(&self, c: &ConceptId) -> HResult<()> {
        if self.names.contains_key(c) {
            Ok(())
        } else {
            Err(HierarchyError::UnknownConcept(c.clone()))
        }
    }

    fn reach(&self, start: &ConceptId, upward: bool) -> BTreeSet<ConceptId> {
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([start.clone()]);
        while let Some(c) = queue.pop_front() {
            let next = if upward { self.parents(&c) } else { self.children(&c) };
            for n in next {
                if seen.insert(n.clone()) {
                    queue.push_back(n.clone());
                }
            }
        }
        seen.remove(start);
        seen
    }

    /// Transitive is-a closure above `c`, excluding `c`.
    pub fn ancestors(&self, c: &ConceptId) -> HResult<BTreeSet<ConceptId>> {
        self.check(c)?;
        Ok(self.reach(c, true))
    }

    pub fn descendants(&self, c: &ConceptId) -> HResult<BTreeSet<ConceptId>> {
        self.check(c)?;
        Ok(self.reach(c, false))
    }

    fn check_domain(&self, labels: &LabelVector) -> HResult<()> {
        match labels.concepts().find(|c| !self.contains(c)) {
            Some(c) => Err(HierarchyError::DomainMismatch(c.clone())),
            None => Ok(()),
        }
    }

    /// True iff every edge `j is-a i` satisfies `y^j = 1 => y^i = 1`.
    pub fn is_consistent(&self, labels: &LabelVector) -> HResult<bool> {
        self.check_domain(labels)?;
        Ok(self
            .edges
            .iter()
            .all(|(child, parent)| !labels.get(child) || labels.get(parent)))
    }

    /// Minimal upward propagation of positives. The result is defined on
    /// exactly the concepts of this hierarchy.
    pub fn closure(&self, labels: &LabelVector) -> HResult<LabelVector> {
        self.check_domain(labels)?;
        let mut out: BTreeMap<ConceptId, bool> = self.names.keys().map(|c| (c.clone(), labels.get(c))).collect();
        let mut queue: VecDeque<ConceptId> = labels.positives().cloned().collect();
        while let Some(c) = queue.pop_front() {
            for p in self.parents(&c) {
                let slot = out.get_mut(p).expect("parent is a known concept");
                if !*slot {
                    *slot = true;
                    queue.push_back(p.clone());
                }
            }
        }
        Ok(LabelVector(out))
    }

    /// Removes `c` and reattaches each of its children to each of its parents.
    pub fn remove_concept(&self, c: &ConceptId) -> HResult<Self> {
        self.check(c)?;
        if *c == self.root {
            return Err(HierarchyError::RootRemoval);
        }
        let parents: Vec<ConceptId> = self.parents(c).into_iter().cloned().collect();
        let children: Vec<ConceptId> = self.children(c).into_iter().cloned().collect();
        let mut next = self.clone();
        next.names.remove(c);
        next.edges.retain(|(ch, p)| ch != c && p != c);
        for x in &children {
            for p in &parents {
                next.edges.insert((x.clone(), p.clone()));
            }
        }
        next.bump()
    }

    pub fn add_relation(&self, child: &ConceptId, parent: &ConceptId) -> HResult<Self> {
        self.check(child)?;
        self.check(parent)?;
        if child == parent {
            return Err(HierarchyError::SelfEdge(child.clone()));
        }
        if self.has_edge(child, parent) {
            return Err(HierarchyError::DuplicateEdge {
                child: child.clone(),
                parent: parent.clone(),
            });
        }
        if self.reach(parent, true).contains(child) {
            return Err(HierarchyError::Cycle {
                child: child.clone(),
                parent: parent.clone(),
            });
        }
        let mut next = self.clone();
        next.edges.insert((child.clone(), parent.clone()));
        next.bump()
    }

    /// Removes `child is-a parent` and links `child` directly to every parent
    /// of `parent` (its grand-parents).
    pub fn remove_relation(&self, child: &ConceptId, parent: &ConceptId) -> HResult<Self> {
        if !self.has_edge(child, parent) {
            return Err(HierarchyError::MissingEdge {
                child: child.clone(),
                parent: parent.clone(),
            });
        }
        let mut next = self.clone();
        next.edges.remove(&(child.clone(), parent.clone()));
        for g in self.parents(parent) {
            next.edges.insert((child.clone(), g.clone()));
        }
        next.bump()
    }

    fn bump(mut self) -> HResult<Self> {
        self.validate()?;
        self.version += 1;
        Ok(self)
    }

    /// Topological sort plus reachability: the DAG has no cycle and every
    /// concept has a path to the root.
    pub fn validate(&self) -> HResult<()> {
        if self.edges.iter().any(|(c, _)| *c == self.root) {
            return Err(HierarchyError::RootWithParent(self.root.clone()));
        }
        let mut indegree: BTreeMap<&ConceptId, usize> = self.names.keys().map(|c| (c, 0)).collect();
        for (_, parent) in &self.edges {
            *indegree.get_mut(parent).expect("validated endpoint") += 1;
        }
        let mut queue: VecDeque<&ConceptId> = indegree.iter().filter(|(_, &d)| d == 0).map(|(c, _)| *c).collect();
        let mut visited = 0;
        while let Some(c) = queue.pop_front() {
            visited += 1;
            for (child, parent) in &self.edges {
                if child == c {
                    let d = indegree.get_mut(parent).expect("validated endpoint");
                    *d -= 1;
                    if *d == 0 {
                        queue.push_back(parent);
                    }
                }
            }
        }
        if visited != self.names.len() {
            let (child, parent) = self
                .edges
                .iter()
                .find(|(_, p)| indegree[p] > 0)
                .cloned()
                .expect("a cycle leaves some edge unvisited");
            return Err(HierarchyError::Cycle { child, parent });
        }
        let below_root = self.reach(&self.root, false);
        for c in self.non_root_concepts() {
            if !below_root.contains(c) {
                return Err(HierarchyError::Unreachable(c.clone()));
            }
        }
        Ok(())
    }

    /// Same concept ids and the same is-a edges; names and versions ignored.
    pub fn same_structure(&self, other: &ConceptHierarchy) -> bool {
        self.root == other.root && self.edges == other.edges && self.names.keys().eq(other.names.keys())
    }
}

#[derive(Serialize, Deserialize)]
struct ConceptJson {
    id: ConceptId,
    name: String,
}

#[derive(Serialize, Deserialize)]
struct HierarchyJson {
    concepts: Vec<ConceptJson>,
    edges: Vec<(ConceptId, ConceptId)>,
    root: ConceptId,
}

impl TryFrom<HierarchyJson> for ConceptHierarchy {
    type Error = HierarchyError;

    fn try_from(json: HierarchyJson) -> HResult<Self> {
        ConceptHierarchy::from_parts(json.root, json.concepts.into_iter().map(|c| (c.id, c.name)), json.edges)
    }
}

impl From<ConceptHierarchy> for HierarchyJson {
    fn from(h: ConceptHierarchy) -> Self {
        HierarchyJson {
            concepts: h.names.into_iter().map(|(id, name)| ConceptJson { id, name }).collect(),
            edges: h.edges.into_iter().collect(),
            root: h.root,
        }
    }
}
