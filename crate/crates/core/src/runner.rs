//! The streaming loop for every method variant, metrics and tuning.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use log::{debug, info};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adaptation::{adapt, forget_adapt, AdaptationReport};
use crate::detector::{detect, DetectorConfig};
use crate::disambiguation::{
    build_description, llr_disambiguate, merge_user_edits, oracle_edits_until, KdEdit, LlrConfig, OracleLedger,
};
use crate::error::{Error, Result};
use crate::events::{EngineEvent, EventSink, NullSink, EVENT_SCHEMA_VERSION};
use crate::hierarchy::{ConceptHierarchy, ConceptId, LabelVector};
use crate::kernels::{median_heuristic_bandwidth, KernelConfig};
use crate::streams::{
    hstagger_generate, load_dataset, rng_for, DriftSchedule, DriftStream, GroundTruth, HstaggerConfig, KdEventKind,
    RngTag,
};
use crate::supervisor::{Question, Supervisor, UserModel};
use crate::windows::{init_windows, predict, ClassifierConfig, Example, SlidingWindow, WindowConfig, WindowStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodVariant {
    TrckdInteractive,
    TrckdOracle,
    TrckdForget,
    TrckdNi,
    TrckdLlr,
    MwKnn,
    #[serde(rename = "knn_1window")]
    Knn1window,
    KnnStatic,
}

impl MethodVariant {
    pub const ALL: [MethodVariant; 8] = [
        MethodVariant::TrckdInteractive,
        MethodVariant::TrckdOracle,
        MethodVariant::TrckdForget,
        MethodVariant::TrckdNi,
        MethodVariant::TrckdLlr,
        MethodVariant::MwKnn,
        MethodVariant::Knn1window,
        MethodVariant::KnnStatic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodVariant::TrckdInteractive => "trckd_interactive",
            MethodVariant::TrckdOracle => "trckd_oracle",
            MethodVariant::TrckdForget => "trckd_forget",
            MethodVariant::TrckdNi => "trckd_ni",
            MethodVariant::TrckdLlr => "trckd_llr",
            MethodVariant::MwKnn => "mw_knn",
            MethodVariant::Knn1window => "knn_1window",
            MethodVariant::KnnStatic => "knn_static",
        }
    }

    /// Variants that run the detector.
    pub fn detects(self) -> bool {
        matches!(
            self,
            MethodVariant::TrckdInteractive | MethodVariant::TrckdNi | MethodVariant::TrckdLlr | MethodVariant::MwKnn
        )
    }

    /// Variants told exactly when the ground truth changes.
    pub fn knows_drift_times(self) -> bool {
        matches!(self, MethodVariant::TrckdOracle | MethodVariant::TrckdForget)
    }
}

impl fmt::Display for MethodVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodVariant::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSource {
    pub csv: PathBuf,
    pub hierarchy: PathBuf,
    #[serde(default = "yes")]
    pub repair: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceConfig {
    Hstagger(HstaggerConfig),
    Dataset(DatasetSource),
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig::Hstagger(HstaggerConfig::default())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub method: MethodVariant,
    pub source: SourceConfig,
    pub schedule: DriftSchedule,
    /// Base window size `w`.
    pub window: usize,
    pub neg_fraction: f64,
    pub k: usize,
    pub tau: f64,
    /// Examples per window entering the MMD statistic.
    pub m_mmd: usize,
    pub min_samples: usize,
    pub stride: usize,
    /// Gaussian bandwidth; the median heuristic on the initial data when unset.
    pub bandwidth: Option<f64>,
    pub m_witness: usize,
    pub holdout: usize,
    /// Keep the holdout labels drawn at the start instead of relabelling
    /// them after every ground-truth change.
    pub freeze_holdout: bool,
    /// Size of the initial data set S1.
    pub initial_size: usize,
    pub iterations: usize,
    pub seeds: Vec<u64>,
    pub tuning_seeds: Vec<u64>,
    pub llr: LlrConfig,
    /// Simulated user for headless interactive runs.
    pub user: UserModel,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            method: MethodVariant::TrckdInteractive,
            source: SourceConfig::default(),
            schedule: DriftSchedule::default(),
            window: 200,
            neg_fraction: 2.0 / 3.0,
            k: 3,
            tau: 0.04,
            m_mmd: 70,
            min_samples: 70,
            stride: 1,
            bandwidth: None,
            m_witness: 5,
            holdout: 64,
            freeze_holdout: false,
            initial_size: 70,
            iterations: 500,
            seeds: (0..8).collect(),
            tuning_seeds: vec![100, 101],
            llr: LlrConfig::default(),
            user: UserModel::Perfect,
        }
    }
}

impl RunConfig {
    pub fn with_method(&self, method: MethodVariant) -> Self {
        RunConfig { method, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("window", self.window),
            ("k", self.k),
            ("m_mmd", self.m_mmd),
            ("m_witness", self.m_witness),
            ("holdout", self.holdout),
            ("initial_size", self.initial_size),
            ("iterations", self.iterations),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(self.neg_fraction > 0.0 && self.neg_fraction < 1.0) {
            return Err(Error::Config("neg_fraction must lie in (0, 1)".into()));
        }
        if let Some(bw) = self.bandwidth {
            KernelConfig::new(bw).map_err(|e| Error::Config(e.to_string()))?;
        }
        self.detector().validate()?;
        if let Some(beta) = self.llr.beta {
            if !(beta > 1.0) {
                return Err(Error::Config(format!("llr beta must exceed 1, got {beta}")));
            }
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is needed".into()));
        }
        let eval: BTreeSet<_> = self.seeds.iter().collect();
        if self.tuning_seeds.iter().any(|s| eval.contains(s)) {
            return Err(Error::Config("tuning and evaluation seeds must be disjoint".into()));
        }
        if let SourceConfig::Hstagger(h) = &self.source {
            h.validate()?;
        }
        self.schedule.validate(self.iterations)
    }

    pub fn detector(&self) -> DetectorConfig {
        DetectorConfig {
            tau: self.tau,
            m: self.m_mmd,
            min_samples: self.min_samples,
            stride: self.stride,
        }
    }

    pub fn windows(&self) -> WindowConfig {
        WindowConfig {
            capacity: self.window,
            neg_fraction: self.neg_fraction,
        }
    }

    pub fn hstagger(&self) -> HstaggerConfig {
        match &self.source {
            SourceConfig::Hstagger(h) => *h,
            SourceConfig::Dataset(_) => HstaggerConfig::default(),
        }
    }

    /// The ground truth a run with `seed` starts from. HSTAGGER rules are
    /// redrawn for every seed.
    pub fn ground_truth(&self, seed: u64) -> Result<GroundTruth> {
        match &self.source {
            SourceConfig::Hstagger(h) => hstagger_generate(&HstaggerConfig {
                seed: h.seed.wrapping_mul(1_000_003).wrapping_add(seed),
                ..*h
            }),
            SourceConfig::Dataset(d) => Ok(load_dataset(&d.csv, &d.hierarchy, d.repair)?.into_ground_truth()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub method: MethodVariant,
    pub seed: u64,
    pub t: usize,
    pub micro_f1: f64,
    /// Whether the detector flagged anything at this iteration.
    pub detected: bool,
    pub flagged: usize,
    /// Questions asked so far in this run.
    pub questions: usize,
    pub hierarchy_version: u64,
}

/// `2 sum TP / (sum true positives + sum predicted positives)`, pooled over
/// all examples and concepts; 1 when both sums are 0.
pub fn micro_f1(preds: &[LabelVector], truths: &[LabelVector]) -> Result<f64> {
    if preds.len() != truths.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions for {} truths",
            preds.len(),
            truths.len()
        )));
    }
    let (mut tp, mut n_true, mut n_pred) = (0usize, 0usize, 0usize);
    for (p, y) in preds.iter().zip(truths) {
        if !p.concepts().eq(y.concepts()) {
            return Err(Error::InvalidArgument(
                "prediction and truth cover different concepts".into(),
            ));
        }
        for ((_, a), (_, b)) in p.iter().zip(y.iter()) {
            tp += usize::from(a && b);
            n_pred += usize::from(a);
            n_true += usize::from(b);
        }
    }
    if n_true + n_pred == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * tp as f64 / (n_true + n_pred) as f64)
}

fn align(v: &LabelVector, keys: &BTreeSet<ConceptId>) -> LabelVector {
    keys.iter().map(|c| (c.clone(), v.get(c))).collect()
}

enum Model {
    Windows(WindowStore),
    Single(SlidingWindow),
}

/// One seeded run, advanced one iteration at a time.
pub struct Engine {
    cfg: RunConfig,
    seed: u64,
    stream: DriftStream,
    h: ConceptHierarchy,
    model: Model,
    kcfg: KernelConfig,
    ccfg: ClassifierConfig,
    holdout_idx: Vec<usize>,
    holdout_x: Vec<Arc<[f64]>>,
    holdout_y: Vec<LabelVector>,
    /// Every non-root concept the ground truth has ever had.
    universe: BTreeSet<ConceptId>,
    ledger: OracleLedger,
    t: usize,
    questions: usize,
}

impl Engine {
    pub fn new(cfg: &RunConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let gt = cfg.ground_truth(seed)?;
        let plan = cfg.schedule.resolve(&gt, &cfg.hstagger(), seed)?;
        let stream = DriftStream::new(gt, plan, seed);
        let truth = stream.truth();
        let h = truth.hierarchy.clone();

        let s1: Vec<Example> = (0..cfg.initial_size).map(|i| stream.example(i)).collect();
        let bandwidth = match cfg.bandwidth {
            Some(bw) => bw,
            None => median_heuristic_bandwidth(&s1.iter().map(|z| z.x.clone()).collect::<Vec<_>>())?,
        };
        let kcfg = KernelConfig::new(bandwidth)?;
        let ccfg = ClassifierConfig::new(cfg.k)?;

        let model = if cfg.method == MethodVariant::Knn1window {
            let mut w = SlidingWindow::new(cfg.window);
            for z in &s1 {
                w.push(z.clone());
            }
            Model::Single(w)
        } else {
            let mut store = init_windows(&s1, &h, cfg.windows())?;
            store.fill_current(&s1);
            Model::Windows(store)
        };

        let holdout_idx: Vec<usize> = (0..cfg.holdout)
            .map(|i| rng_for(seed, RngTag::Holdout, i as u64).gen_range(0..truth.pool_size()))
            .collect();
        let holdout_x = holdout_idx.iter().map(|&i| truth.features(i)).collect();
        let holdout_y = holdout_idx.iter().map(|&i| truth.labels(i)).collect();
        let universe = h.non_root_concepts().cloned().collect();

        Ok(Engine {
            cfg: cfg.clone(),
            seed,
            stream,
            h,
            model,
            kcfg,
            ccfg,
            holdout_idx,
            holdout_x,
            holdout_y,
            universe,
            ledger: OracleLedger::new(),
            t: 0,
            questions: 0,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Next iteration to run.
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn is_finished(&self) -> bool {
        self.t >= self.cfg.iterations
    }

    pub fn hierarchy(&self) -> &ConceptHierarchy {
        &self.h
    }

    pub fn truth(&self) -> &GroundTruth {
        self.stream.truth()
    }

    pub fn bandwidth(&self) -> f64 {
        self.kcfg.bandwidth()
    }

    /// Per-concept windows; `None` for the single-window baseline.
    pub fn store(&self) -> Option<&WindowStore> {
        match &self.model {
            Model::Windows(s) => Some(s),
            Model::Single(_) => None,
        }
    }

    pub fn questions(&self) -> usize {
        self.questions
    }

    pub fn init_event(&self) -> EngineEvent {
        EngineEvent::Init {
            schema_version: EVENT_SCHEMA_VERSION,
            seed: self.seed,
            method: self.cfg.method,
            dim: self.truth().dim(),
            bandwidth: self.kcfg.bandwidth(),
            hierarchy: self.h.clone(),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<LabelVector> {
        match &self.model {
            Model::Windows(store) => predict(x, store, &self.h, &self.ccfg),
            Model::Single(w) => w.predict(x, &self.h, &self.ccfg),
        }
    }

    fn store_mut(&mut self) -> Option<&mut WindowStore> {
        match &mut self.model {
            Model::Windows(s) => Some(s),
            Model::Single(_) => None,
        }
    }

    fn install(&mut self, store: WindowStore, h: ConceptHierarchy) {
        self.model = Model::Windows(store);
        self.h = h;
    }

    /// Advances the ground truth and lets variants that know drift times
    /// react before the next example arrives.
    fn ground_truth_step(&mut self, sink: &mut dyn EventSink) -> Result<()> {
        let t = self.t;
        let new_events = self.stream.advance_to(t)?;
        if new_events.is_empty() {
            return Ok(());
        }
        let truth = self.stream.truth();
        self.universe.extend(truth.hierarchy.non_root_concepts().cloned());
        if !self.cfg.freeze_holdout {
            self.holdout_y = self.holdout_idx.iter().map(|&i| truth.labels(i)).collect();
        }
        sink.emit(&EngineEvent::GroundTruth {
            t,
            events: new_events.clone(),
        });

        match self.cfg.method {
            MethodVariant::TrckdOracle => {
                let edits = oracle_edits_until(t, &truth.event_log, &mut self.ledger);
                if !edits.is_empty() {
                    self.apply_edits(&edits, sink)?;
                }
            }
            MethodVariant::TrckdForget => {
                let touched: BTreeSet<ConceptId> = new_events
                    .iter()
                    .filter_map(|e| match &e.kind {
                        KdEventKind::Edit(edit) => Some(edit.concepts().into_iter().cloned()),
                        KdEventKind::ConceptAddition(_) => None,
                    })
                    .flatten()
                    .collect();
                if let Some(store) = self.store_mut() {
                    let next = forget_adapt(store, &touched);
                    *store = next;
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn apply_edits(&mut self, edits: &[KdEdit], sink: &mut dyn EventSink) -> Result<AdaptationReport> {
        let store = self
            .store()
            .ok_or_else(|| Error::InvalidArgument("no windows to adapt".into()))?;
        let (store, h, report) = adapt(store, &self.h, edits)?;
        self.install(store, h);
        sink.emit(&EngineEvent::Adaptation {
            t: self.t,
            report: report.clone(),
        });
        Ok(report)
    }

    /// Starts tracking concepts that appear in labels but are unknown to the
    /// machine.
    fn track_new_concepts(&mut self, z: &Example, sink: &mut dyn EventSink) -> Result<()> {
        let unknown: Vec<ConceptId> = z.y.positives().filter(|c| !self.h.contains(c)).cloned().collect();
        for c in unknown {
            let root = self.h.root().clone();
            self.h = self.h.add_concept(c.clone(), c.as_str(), &[root])?;
            if let Some(store) = self.store_mut() {
                store.add_concept(c.clone());
            }
            sink.emit(&EngineEvent::ConceptTracked { t: self.t, concept: c });
        }
        Ok(())
    }

    fn ask(
        &mut self,
        desc: &crate::disambiguation::DriftDescription,
        sup: &mut dyn Supervisor,
        sink: &mut dyn EventSink,
    ) -> Result<()> {
        self.questions += 1;
        sink.emit(&EngineEvent::Question {
            t: self.t,
            description: desc.clone(),
        });
        let mut rejected = 0;
        loop {
            let answer = sup.answer(&Question {
                description: desc,
                hierarchy: &self.h,
                truth: &self.stream.truth().event_log,
            })?;
            sink.emit(&EngineEvent::Answer {
                t: self.t,
                answer: answer.clone(),
            });
            let store = self.store().expect("interactive runs keep windows");
            let attempt = merge_user_edits(desc, &answer.edits, &answer.deselected, &self.h)
                .and_then(|edits| adapt(store, &self.h, &edits));
            match attempt {
                Ok((store, h, report)) => {
                    sup.outcome(Ok(&report));
                    self.install(store, h);
                    sink.emit(&EngineEvent::Adaptation { t: self.t, report });
                    return Ok(());
                }
                Err(e) => {
                    sup.outcome(Err(&e));
                    sink.emit(&EngineEvent::Rejected {
                        t: self.t,
                        reason: e.to_string(),
                    });
                    rejected += 1;
                    if sup.max_attempts().is_some_and(|max| rejected >= max) {
                        return Err(Error::Rejected(format!("{rejected} answers rejected, last: {e}")));
                    }
                }
            }
        }
    }

    fn detection_step(&mut self, sup: &mut dyn Supervisor, sink: &mut dyn EventSink) -> Result<(bool, usize)> {
        let dcfg = self.cfg.detector();
        if !self.cfg.method.detects() || !dcfg.runs_at(self.t) {
            return Ok((false, 0));
        }
        let store = self.store().expect("detecting variants keep windows");
        let det = detect(store, &self.kcfg, &dcfg)?;
        if !det.any() {
            return Ok((false, 0));
        }
        let n = det.flagged.len();
        debug!("seed {} t {}: flagged {:?}", self.seed, self.t, det.flagged);
        sink.emit(&EngineEvent::Detection {
            t: self.t,
            flagged: det.flagged.clone(),
            scores: det.scores.clone(),
        });
        match self.cfg.method {
            MethodVariant::MwKnn => {
                let next = forget_adapt(store, &det.flagged);
                *self.store_mut().expect("windows") = next;
            }
            MethodVariant::TrckdNi => {
                let edits: Vec<KdEdit> = det.flagged.iter().cloned().map(KdEdit::concept_drift).collect();
                self.apply_edits(&edits, sink)?;
            }
            MethodVariant::TrckdLlr => {
                let desc = build_description(&det, store, &self.kcfg, self.cfg.m_witness, self.t)?;
                let edits = llr_disambiguate(&desc, store, &self.h, &self.cfg.llr);
                self.apply_edits(&edits, sink)?;
            }
            MethodVariant::TrckdInteractive => {
                let desc = build_description(&det, store, &self.kcfg, self.cfg.m_witness, self.t)?;
                self.ask(&desc, sup, sink)?;
            }
            _ => unreachable!("non-detecting variant"),
        }
        Ok((true, n))
    }

    /// Micro-F1 on the holdout over every concept the ground truth ever had
    /// and every concept the machine knows, root excluded.
    pub fn holdout_f1(&self) -> Result<f64> {
        let mut keys = self.universe.clone();
        keys.extend(self.h.non_root_concepts().cloned());
        let preds = self
            .holdout_x
            .iter()
            .map(|x| self.predict(x).map(|p| align(&p, &keys)))
            .collect::<Result<Vec<_>>>()?;
        let truths: Vec<LabelVector> = self.holdout_y.iter().map(|y| align(y, &keys)).collect();
        micro_f1(&preds, &truths)
    }

    /// Runs one iteration: ground-truth events, the next example, detection
    /// and adaptation, then evaluation.
    pub fn step(&mut self, sup: &mut dyn Supervisor, sink: &mut dyn EventSink) -> Result<MetricRecord> {
        if self.is_finished() {
            return Err(Error::InvalidArgument("run already finished".into()));
        }
        self.ground_truth_step(sink)?;
        let z = self.stream.example(self.cfg.initial_size + self.t);
        self.track_new_concepts(&z, sink)?;
        match &mut self.model {
            Model::Windows(store) => store.push_example(&z),
            Model::Single(w) => w.push(z),
        }
        let (detected, flagged) = self.detection_step(sup, sink)?;
        let record = MetricRecord {
            method: self.cfg.method,
            seed: self.seed,
            t: self.t,
            micro_f1: self.holdout_f1()?,
            detected,
            flagged,
            questions: self.questions,
            hierarchy_version: self.h.version(),
        };
        sink.emit(&EngineEvent::Metric(record.clone()));
        self.t += 1;
        if self.is_finished() {
            sink.emit(&EngineEvent::Finished { t: self.t });
        }
        Ok(record)
    }

    pub fn run(mut self, sup: &mut dyn Supervisor, sink: &mut dyn EventSink) -> Result<Vec<MetricRecord>> {
        sink.emit(&self.init_event());
        let mut records = Vec::with_capacity(self.cfg.iterations);
        while !self.is_finished() {
            match self.step(sup, sink) {
                Ok(r) => records.push(r),
                Err(e) => {
                    sink.emit(&EngineEvent::Failed { reason: e.to_string() });
                    return Err(e);
                }
            }
        }
        Ok(records)
    }
}

/// Runs one seed with the configured simulated user.
pub fn run_seed(cfg: &RunConfig, seed: u64, sink: &mut dyn EventSink) -> Result<Vec<MetricRecord>> {
    let mut user = cfg.user.build();
    Engine::new(cfg, seed)?.run(user.as_mut(), sink)
}

/// Runs every evaluation seed in parallel; records are ordered by seed,
/// then iteration.
pub fn run(cfg: &RunConfig) -> Result<Vec<MetricRecord>> {
    run_seeds_with(cfg, &cfg.seeds, |_| NullSink)
}

pub fn run_seeds_with<S, F>(cfg: &RunConfig, seeds: &[u64], make_sink: F) -> Result<Vec<MetricRecord>>
where
    S: EventSink + Send,
    F: Fn(u64) -> S + Sync,
{
    cfg.validate()?;
    let results: Vec<Result<Vec<MetricRecord>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                let make_sink = &make_sink;
                scope.spawn(move || {
                    let mut sink = make_sink(seed);
                    run_seed(cfg, seed, &mut sink)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Error::InvalidArgument("worker panicked".into())))
            })
            .collect()
    });
    let mut out = Vec::new();
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

/// Mean micro-F1 over iterations `t` in `[from, to)`, pooled over seeds.
pub fn mean_f1(records: &[MetricRecord], from: usize, to: usize) -> f64 {
    let sel: Vec<f64> = records
        .iter()
        .filter(|r| r.t >= from && r.t < to)
        .map(|r| r.micro_f1)
        .collect();
    if sel.is_empty() {
        return f64::NAN;
    }
    sel.iter().sum::<f64>() / sel.len() as f64
}

/// Mean micro-F1 per seed over `[from, to)`.
pub fn mean_f1_by_seed(records: &[MetricRecord], from: usize, to: usize) -> BTreeMap<u64, f64> {
    let mut sums: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.t >= from && r.t < to) {
        let e = sums.entry(r.seed).or_default();
        e.0 += r.micro_f1;
        e.1 += 1;
    }
    sums.into_iter().map(|(s, (sum, n))| (s, sum / n as f64)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub tau: f64,
    pub k: usize,
}

/// The grid searched by default: `tau` in {0.04, 0.05}, `k` in {3, 5, 11}.
pub fn default_grid() -> Vec<GridPoint> {
    let mut grid = Vec::new();
    for tau in [0.04, 0.05] {
        for k in [3, 5, 11] {
            grid.push(GridPoint { tau, k });
        }
    }
    grid
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best: GridPoint,
    pub scores: Vec<(GridPoint, f64)>,
}

/// Picks the grid point with the best mean micro-F1 over the final third of
/// the stream on the tuning seeds. Ties go to the earlier grid point.
pub fn tune(cfg: &RunConfig, grid: &[GridPoint]) -> Result<TuneResult> {
    if grid.is_empty() {
        return Err(Error::Config("tuning grid is empty".into()));
    }
    if cfg.tuning_seeds.is_empty() {
        return Err(Error::Config("no tuning seeds".into()));
    }
    let from = cfg.iterations - cfg.iterations / 3;
    let mut scores = Vec::with_capacity(grid.len());
    let mut best: Option<(GridPoint, f64)> = None;
    for &p in grid {
        let point_cfg = RunConfig {
            tau: p.tau,
            k: p.k,
            ..cfg.clone()
        };
        let records = run_seeds_with(&point_cfg, &cfg.tuning_seeds, |_| NullSink)?;
        let score = mean_f1(&records, from, cfg.iterations);
        info!("tau={} k={}: final-third micro-F1 {score:.4}", p.tau, p.k);
        scores.push((p, score));
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((p, score));
        }
    }
    Ok(TuneResult {
        best: best.expect("grid is nonempty").0,
        scores,
    })
}

pub fn write_metrics_csv(records: &[MetricRecord], out: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics_csv(input: impl std::io::Read) -> Result<Vec<MetricRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}
