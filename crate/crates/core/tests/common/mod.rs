//! Strategies, naive oracles and checks shared by the property tests and the
//! acceptance harness.
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use proptest::test_runner::TestCaseResult;

use kdrift::adaptation::adapt;
use kdrift::disambiguation::KdEdit;
use kdrift::hierarchy::{ConceptHierarchy, ConceptId, LabelVector};
use kdrift::kernels::{mmd_squared, product_kernel, ExamplePoint, KernelConfig};
use kdrift::windows::{
    init_windows, knn_vote, predict, ClassifierConfig, Example, WindowConfig, WindowEntry, WindowPair, WindowRole,
};

pub fn point(dim: usize) -> impl Strategy<Value = ExamplePoint> {
    (prop::collection::vec(-3.0f64..3.0, dim), any::<bool>()).prop_map(|(x, y)| ExamplePoint::new(x, y))
}

pub fn sample_pair() -> impl Strategy<Value = (Vec<ExamplePoint>, Vec<ExamplePoint>, f64)> {
    (1usize..5).prop_flat_map(|dim| {
        (
            prop::collection::vec(point(dim), 1..=20),
            prop::collection::vec(point(dim), 1..=20),
            0.1f64..5.0,
        )
    })
}

pub fn naive_kernel(a: &ExamplePoint, b: &ExamplePoint, sigma: f64) -> f64 {
    if a.y != b.y {
        return 0.0;
    }
    let mut d2 = 0.0;
    for i in 0..a.x.len() {
        d2 += (a.x[i] - b.x[i]).powi(2);
    }
    (-d2 / (2.0 * sigma * sigma)).exp()
}

pub fn naive_mmd(a: &[ExamplePoint], b: &[ExamplePoint], sigma: f64) -> f64 {
    let mut xx = 0.0;
    for p in a {
        for q in a {
            xx += naive_kernel(p, q, sigma);
        }
    }
    let mut yy = 0.0;
    for p in b {
        for q in b {
            yy += naive_kernel(p, q, sigma);
        }
    }
    let mut xy = 0.0;
    for p in a {
        for q in b {
            xy += naive_kernel(p, q, sigma);
        }
    }
    let (n, m) = (a.len() as f64, b.len() as f64);
    xx / (n * n) + yy / (m * m) - 2.0 * xy / (n * m)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn eigenvalues(k: &[Vec<f64>]) -> Vec<f64> {
    let n = k.len();
    let mut a = k.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-22 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..n {
                    let (arp, arq) = (a[r][p], a[r][q]);
                    a[r][p] = c * arp - s * arq;
                    a[r][q] = s * arp + c * arq;
                }
                for r in 0..n {
                    let (apr, aqr) = (a[p][r], a[q][r]);
                    a[p][r] = c * apr - s * aqr;
                    a[q][r] = s * apr + c * aqr;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

pub fn entry(uid: u64, x: Vec<f64>, y: bool) -> WindowEntry {
    WindowEntry {
        uid,
        t: uid as usize,
        point: ExamplePoint::new(x, y),
        origin: None,
    }
}

// ---- hierarchy edits against an independent model ----

#[derive(Clone, Debug)]
pub struct Model {
    pub concepts: BTreeSet<String>,
    pub edges: BTreeSet<(String, String)>,
}

impl Model {
    pub fn parents(&self, c: &str) -> Vec<String> {
        self.edges
            .iter()
            .filter(|(ch, _)| ch == c)
            .map(|(_, p)| p.clone())
            .collect()
    }

    pub fn children(&self, c: &str) -> Vec<String> {
        self.edges
            .iter()
            .filter(|(_, p)| p == c)
            .map(|(ch, _)| ch.clone())
            .collect()
    }

    pub fn reaches_up(&self, from: &str, target: &str) -> bool {
        let mut stack = vec![from.to_string()];
        let mut seen = BTreeSet::new();
        while let Some(c) = stack.pop() {
            if c == target {
                return true;
            }
            if seen.insert(c.clone()) {
                stack.extend(self.parents(&c));
            }
        }
        false
    }

    pub fn valid(&self) -> bool {
        if self.edges.iter().any(|(c, _)| c == "root") {
            return false;
        }
        // acyclic: no edge (c, p) with p reaching c
        for (c, p) in &self.edges {
            if self.reaches_up(p, c) {
                return false;
            }
        }
        self.concepts.iter().all(|c| self.reaches_up(c, "root"))
    }

    pub fn lib(&self) -> ConceptHierarchy {
        ConceptHierarchy::from_parts(
            ConceptId::from("root"),
            self.concepts.iter().map(|c| (ConceptId::from(c.as_str()), c.clone())),
            self.edges
                .iter()
                .map(|(c, p)| (ConceptId::from(c.as_str()), ConceptId::from(p.as_str()))),
        )
        .unwrap()
    }

    pub fn same_as(&self, h: &ConceptHierarchy) -> bool {
        let concepts: BTreeSet<String> = h.concepts().map(|c| c.as_str().to_string()).collect();
        let edges: BTreeSet<(String, String)> = h
            .edges()
            .map(|(c, p)| (c.as_str().to_string(), p.as_str().to_string()))
            .collect();
        concepts == self.concepts && edges == self.edges
    }
}

/// A random hierarchy: concept `i` has a nonempty set of parents among the
/// root and the concepts before it.
pub fn hierarchy_model() -> impl Strategy<Value = Model> {
    prop::collection::vec(any::<u16>(), 1..7).prop_map(|masks| {
        let mut m = Model {
            concepts: ["root".to_string()].into_iter().collect(),
            edges: BTreeSet::new(),
        };
        for (i, mask) in masks.iter().enumerate() {
            let name = format!("c{i}");
            let candidates: Vec<String> = std::iter::once("root".to_string())
                .chain((0..i).map(|j| format!("c{j}")))
                .collect();
            let mut any = false;
            for (b, p) in candidates.iter().enumerate() {
                if mask >> (b % 16) & 1 == 1 {
                    m.edges.insert((name.clone(), p.clone()));
                    any = true;
                }
            }
            if !any {
                m.edges
                    .insert((name.clone(), candidates[*mask as usize % candidates.len()].clone()));
            }
            m.concepts.insert(name);
        }
        m
    })
}

#[derive(Clone, Debug)]
pub enum Op {
    AddRelation(usize, usize),
    RemoveRelation(usize, usize),
    RemoveConcept(usize),
    AddConcept(usize),
}

pub fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        3 => (any::<usize>(), any::<usize>()).prop_map(|(a, b)| Op::AddRelation(a, b)),
        2 => (any::<usize>(), any::<usize>()).prop_map(|(a, b)| Op::RemoveRelation(a, b)),
        1 => any::<usize>().prop_map(Op::RemoveConcept),
        1 => any::<usize>().prop_map(Op::AddConcept),
    ]
}

pub fn nth(m: &Model, i: usize) -> String {
    m.concepts.iter().nth(i % m.concepts.len()).unwrap().clone()
}

/// Applies `op` to the model; `None` when the model says it must fail.
pub fn model_apply(m: &Model, op: &Op, fresh: &str) -> (String, Option<Model>) {
    let mut next = m.clone();
    match op {
        Op::AddRelation(a, b) => {
            let (c, p) = (nth(m, *a), nth(m, *b));
            let desc = format!("add {c} -> {p}");
            if c == p || m.edges.contains(&(c.clone(), p.clone())) {
                return (desc, None);
            }
            next.edges.insert((c, p));
            (desc, Some(next).filter(Model::valid))
        }
        Op::RemoveRelation(a, b) => {
            // pick an existing edge most of the time
            let edges: Vec<_> = m.edges.iter().cloned().collect();
            let (c, p) = if !edges.is_empty() && a % 4 != 0 {
                edges[b % edges.len()].clone()
            } else {
                (nth(m, *a), nth(m, *b))
            };
            let desc = format!("remove {c} -> {p}");
            if !next.edges.remove(&(c.clone(), p.clone())) {
                return (desc, None);
            }
            for g in m.parents(&p) {
                next.edges.insert((c.clone(), g));
            }
            (desc, Some(next).filter(Model::valid))
        }
        Op::RemoveConcept(a) => {
            let c = nth(m, *a);
            let desc = format!("remove concept {c}");
            if c == "root" {
                return (desc, None);
            }
            let (ps, cs) = (m.parents(&c), m.children(&c));
            next.concepts.remove(&c);
            next.edges.retain(|(x, y)| *x != c && *y != c);
            for x in &cs {
                for p in &ps {
                    next.edges.insert((x.clone(), p.clone()));
                }
            }
            (desc, Some(next).filter(Model::valid))
        }
        Op::AddConcept(a) => {
            let p = nth(m, *a);
            next.concepts.insert(fresh.to_string());
            next.edges.insert((fresh.to_string(), p.clone()));
            (format!("add concept {fresh} under {p}"), Some(next))
        }
    }
}

pub fn lib_apply(h: &ConceptHierarchy, desc: &str) -> Result<ConceptHierarchy, String> {
    let words: Vec<&str> = desc.split_whitespace().collect();
    let id = |s: &str| ConceptId::from(s);
    let r = match words.as_slice() {
        ["add", "concept", c, "under", p] => h.add_concept(*c, *c, &[id(p)]),
        ["add", c, "->", p] => h.add_relation(&id(c), &id(p)),
        ["remove", "concept", c] => h.remove_concept(&id(c)),
        ["remove", c, "->", p] => h.remove_relation(&id(c), &id(p)),
        _ => unreachable!("{desc}"),
    };
    r.map_err(|e| e.to_string())
}

pub fn labels_strategy() -> impl Strategy<Value = (Model, Vec<bool>)> {
    hierarchy_model().prop_flat_map(|m| {
        let n = m.concepts.len();
        (Just(m), prop::collection::vec(any::<bool>(), n))
    })
}

pub fn label_vector(h: &ConceptHierarchy, bits: &[bool]) -> LabelVector {
    let mut y = LabelVector::new();
    for (c, &b) in h.concepts().zip(bits) {
        y.set(c.clone(), b);
    }
    y
}

// ---- prediction and window invariants ----

pub fn consistent_example(h: &ConceptHierarchy, uid: u64, x: Vec<f64>, bits: &[bool]) -> Example {
    let mut y = h.closure(&label_vector(h, bits)).unwrap();
    y.set(h.root().clone(), true);
    Example {
        uid,
        t: uid as usize,
        x: x.into(),
        y,
    }
}

pub fn random_edit(h: &ConceptHierarchy, a: usize, b: usize, kind: u8) -> KdEdit {
    let cs: Vec<ConceptId> = h.non_root_concepts().cloned().collect();
    let pick = |i: usize| cs[i % cs.len()].clone();
    match kind % 4 {
        0 => KdEdit::concept_drift(pick(a)),
        1 => KdEdit::relation_addition(pick(a), pick(b)),
        2 => {
            let edges: Vec<_> = h.edges().map(|(c, p)| (c.clone(), p.clone())).collect();
            let (c, p) = edges[b % edges.len()].clone();
            KdEdit::relation_removal(c, p)
        }
        _ => KdEdit::concept_removal(pick(a)),
    }
}

#[derive(Clone, Debug)]
pub enum WinOp {
    Push(bool),
    Absorb(Vec<bool>, bool),
    Swap,
    SetCapacity(usize),
}

pub fn win_op() -> impl Strategy<Value = WinOp> {
    prop_oneof![
        8 => any::<bool>().prop_map(WinOp::Push),
        2 => (prop::collection::vec(any::<bool>(), 0..30), any::<bool>()).prop_map(|(v, r)| WinOp::Absorb(v, r)),
        1 => Just(WinOp::Swap),
        1 => (1usize..60).prop_map(WinOp::SetCapacity),
    ]
}

// ---- checks ----

pub type MmdCase = (Vec<ExamplePoint>, Vec<ExamplePoint>, f64);

pub fn check_mmd_oracle((a, b, sigma): MmdCase) -> TestCaseResult {
    let cfg = KernelConfig::new(sigma).unwrap();
    let got = mmd_squared(&a, &b, &cfg).unwrap();
    let want = naive_mmd(&a, &b, sigma).max(0.0);
    prop_assert!((got - want).abs() <= 1e-9, "{got} vs {want}");
    Ok(())
}

pub fn check_mmd_symmetry((a, b, sigma): MmdCase) -> TestCaseResult {
    let cfg = KernelConfig::new(sigma).unwrap();
    let ab = mmd_squared(&a, &b, &cfg).unwrap();
    let ba = mmd_squared(&b, &a, &cfg).unwrap();
    prop_assert!((ab - ba).abs() <= 1e-12);
    prop_assert!(ab >= 0.0);
    prop_assert!(mmd_squared(&a, &a, &cfg).unwrap() <= 1e-12);
    Ok(())
}

pub fn check_gram_psd((a, _, sigma): MmdCase) -> TestCaseResult {
    let cfg = KernelConfig::new(sigma).unwrap();
    let k: Vec<Vec<f64>> = a
        .iter()
        .map(|p| a.iter().map(|q| product_kernel(p, q, &cfg).unwrap()).collect())
        .collect();
    for i in 0..k.len() {
        prop_assert!((k[i][i] - 1.0).abs() < 1e-12);
        for j in 0..k.len() {
            prop_assert_eq!(k[i][j], k[j][i]);
        }
    }
    let min = eigenvalues(&k).into_iter().fold(f64::INFINITY, f64::min);
    prop_assert!(min >= -1e-9 * k.len() as f64, "smallest eigenvalue {min}");
    Ok(())
}

/// (grid points with labels, query, k, uid scramble)
pub type KnnCase = (Vec<(Vec<u8>, bool)>, Vec<u8>, usize, u64);

/// Coordinates on a coarse grid so distance ties are common.
pub fn knn_cases() -> impl Strategy<Value = KnnCase> {
    (
        prop::collection::vec((prop::collection::vec(0u8..4, 2), any::<bool>()), 0..40),
        prop::collection::vec(0u8..4, 2),
        1usize..12,
        any::<u64>(),
    )
}

pub fn check_knn((pts, q, k, perm_seed): KnnCase) -> TestCaseResult {
    let mut uids: Vec<u64> = (0..pts.len() as u64).collect();
    // distinct uids in a scrambled order
    uids.sort_by_key(|u| u.wrapping_mul(perm_seed | 1).rotate_left(17));
    let entries: Vec<WindowEntry> = pts
        .iter()
        .zip(&uids)
        .map(|((x, y), &u)| entry(u, x.iter().map(|&v| v as f64).collect(), *y))
        .collect();
    let qx: Vec<f64> = q.iter().map(|&v| v as f64).collect();

    let mut sorted: Vec<(f64, u64, bool)> = entries
        .iter()
        .map(|e| {
            let d: f64 = e.point.x.iter().zip(&qx).map(|(a, b)| (a - b) * (a - b)).sum();
            (d, e.uid, e.point.y)
        })
        .collect();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(b.1.cmp(&a.1)));
    sorted.truncate(k);
    let pos = sorted.iter().filter(|s| s.2).count();
    let want = !sorted.is_empty() && 2 * pos > sorted.len();
    prop_assert_eq!(knn_vote(&qx, &entries, k), want);
    Ok(())
}

pub fn edit_cases() -> impl Strategy<Value = (Model, Vec<Op>)> {
    (hierarchy_model(), prop::collection::vec(op(), 1..16))
}

/// Every edit succeeds exactly when the model says the result is a rooted
/// DAG, and then yields the model's structure.
pub fn check_edit_sequence((start, ops): (Model, Vec<Op>)) -> TestCaseResult {
    let mut model = start;
    let mut h = model.lib();
    for (i, o) in ops.iter().enumerate() {
        let (desc, expected) = model_apply(&model, o, &format!("n{i}"));
        let before = h.version();
        match (lib_apply(&h, &desc), expected) {
            (Ok(next), Some(m)) => {
                prop_assert!(m.same_as(&next), "{desc}: structure differs");
                prop_assert!(next.validate().is_ok());
                prop_assert_eq!(next.version(), before + 1);
                h = next;
                model = m;
            }
            (Err(_), None) => {}
            (Ok(_), None) => prop_assert!(false, "{desc} should have failed"),
            (Err(e), Some(_)) => prop_assert!(false, "{desc} failed: {e}"),
        }
    }
    Ok(())
}

pub fn check_closure((m, bits): (Model, Vec<bool>)) -> TestCaseResult {
    let h = m.lib();
    let y = label_vector(&h, &bits);
    let once = h.closure(&y).unwrap();
    prop_assert_eq!(h.closure(&once).unwrap(), once.clone());
    prop_assert!(h.is_consistent(&once).unwrap());
    // exactly the positives and their ancestors
    let mut want: BTreeSet<ConceptId> = BTreeSet::new();
    for c in y.positives() {
        want.insert(c.clone());
        want.extend(h.ancestors(c).unwrap());
    }
    let got: BTreeSet<ConceptId> = once.positives().cloned().collect();
    prop_assert_eq!(got, want);
    Ok(())
}

/// (x, label bits, query, edit pick a, edit pick b, edit kind; kinds >= 4 mean no edit)
pub type Step = (Vec<f64>, Vec<bool>, Vec<f64>, usize, usize, u8);
pub const STEPS_PER_CASE: usize = 100;

pub fn prediction_cases() -> impl Strategy<Value = (Model, Vec<Step>, usize)> {
    (
        hierarchy_model(),
        prop::collection::vec(
            (
                prop::collection::vec(-1.0f64..1.0, 3),
                prop::collection::vec(any::<bool>(), 8),
                prop::collection::vec(-1.0f64..1.0, 3),
                any::<usize>(),
                any::<usize>(),
                0u8..12,
            ),
            STEPS_PER_CASE,
        ),
        1usize..8,
    )
}

/// Every prediction is closed under the current hierarchy, whatever edits
/// were applied in between.
pub fn check_predictions((m, steps, k): (Model, Vec<Step>, usize)) -> TestCaseResult {
    let mut h = m.lib();
    let cfg = WindowConfig {
        capacity: 30,
        neg_fraction: 2.0 / 3.0,
    };
    let s1: Vec<Example> = (0..5)
        .map(|i| consistent_example(&h, i, vec![0.1 * i as f64; 3], &[i % 2 == 0; 8]))
        .collect();
    let mut store = init_windows(&s1, &h, cfg).unwrap();
    let ccfg = ClassifierConfig::new(k).unwrap();
    for (i, (x, bits, q, a, b, kind)) in steps.into_iter().enumerate() {
        let z = consistent_example(&h, 5 + i as u64, x, &bits);
        store.push_example(&z);
        if kind < 4 && h.non_root_concepts().count() > 1 {
            let e = random_edit(&h, a, b, kind);
            if let Ok((s, h2, _)) = adapt(&store, &h, &[e]) {
                store = s;
                h = h2;
            }
        }
        let y = predict(&q, &store, &h, &ccfg).unwrap();
        prop_assert!(h.is_consistent(&y).unwrap());
        prop_assert!(y.get(h.root()));
        let domain: BTreeSet<&ConceptId> = y.concepts().collect();
        prop_assert_eq!(domain, h.concepts().collect::<BTreeSet<_>>());
    }
    Ok(())
}

pub fn window_cases() -> impl Strategy<Value = (usize, f64, Vec<WinOp>)> {
    (1usize..40, 0.1f64..0.9, prop::collection::vec(win_op(), 1..200))
}

pub fn check_windows((cap, neg_fraction, ops): (usize, f64, Vec<WinOp>)) -> TestCaseResult {
    let cfg = WindowConfig {
        capacity: cap,
        neg_fraction,
    };
    let mut pair = WindowPair::new(ConceptId::from("c"), &cfg);
    let mut uid = 0u64;
    let mut pushed: BTreeMap<u64, bool> = BTreeMap::new();
    for o in ops {
        match o {
            WinOp::Push(y) => {
                pair.push_current(entry(uid, vec![uid as f64], y));
                pushed.insert(uid, y);
                uid += 1;
            }
            WinOp::Absorb(ys, old) => {
                let batch: Vec<_> = ys
                    .iter()
                    .map(|&y| {
                        let e = entry(uid, vec![uid as f64], y);
                        pushed.insert(uid, y);
                        uid += 1;
                        e
                    })
                    .collect();
                let role = if old { WindowRole::Old } else { WindowRole::Cur };
                pair.absorb(role, batch);
            }
            WinOp::Swap => pair.swap_to_past(),
            WinOp::SetCapacity(c) => pair.set_capacity(c),
        }
        prop_assert!(pair.neg_cap() + pair.pos_cap() >= pair.capacity());
        for role in [WindowRole::Old, WindowRole::Cur] {
            let w = pair.window(role);
            prop_assert!(w.len() <= pair.capacity(), "{} > {}", w.len(), pair.capacity());
            let uids: Vec<u64> = w.entries().iter().map(|e| e.uid).collect();
            prop_assert!(uids.windows(2).all(|p| p[0] < p[1]), "unsorted or duplicate uids");
            for e in w.entries() {
                prop_assert_eq!(pushed.get(&e.uid), Some(&e.label()));
            }
        }
    }
    Ok(())
}
