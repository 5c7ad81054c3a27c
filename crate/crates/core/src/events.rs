//! Engine events, written as tagged JSON lines.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::adaptation::AdaptationReport;
use crate::disambiguation::{Answer, DriftDescription};
use crate::hierarchy::{ConceptHierarchy, ConceptId};
use crate::runner::{MethodVariant, MetricRecord};
use crate::streams::KdEvent;

/// Bumped whenever an event payload changes shape.
pub const EVENT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EngineEvent {
    Init {
        schema_version: u32,
        seed: u64,
        method: MethodVariant,
        dim: usize,
        bandwidth: f64,
        hierarchy: ConceptHierarchy,
    },
    GroundTruth {
        t: usize,
        events: Vec<KdEvent>,
    },
    ConceptTracked {
        t: usize,
        concept: ConceptId,
    },
    Detection {
        t: usize,
        flagged: BTreeSet<ConceptId>,
        scores: BTreeMap<ConceptId, f64>,
    },
    Question {
        t: usize,
        description: DriftDescription,
    },
    Answer {
        t: usize,
        answer: Answer,
    },
    Rejected {
        t: usize,
        reason: String,
    },
    Adaptation {
        t: usize,
        report: AdaptationReport,
    },
    Metric(MetricRecord),
    Finished {
        t: usize,
    },
    Failed {
        reason: String,
    },
}

pub trait EventSink {
    fn emit(&mut self, event: &EngineEvent);
}

#[derive(Clone, Copy, Debug, Default)]
pub struct NullSink;

impl EventSink for NullSink {
    fn emit(&mut self, _event: &EngineEvent) {}
}

impl EventSink for Vec<EngineEvent> {
    fn emit(&mut self, event: &EngineEvent) {
        self.push(event.clone());
    }
}

/// One JSON object per line. Write errors are logged and otherwise ignored
/// so a full disk never aborts a run.
pub struct JsonLinesSink<W: Write> {
    out: W,
}

impl<W: Write> JsonLinesSink<W> {
    pub fn new(out: W) -> Self {
        JsonLinesSink { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> EventSink for JsonLinesSink<W> {
    fn emit(&mut self, event: &EngineEvent) {
        let res = serde_json::to_writer(&mut self.out, event)
            .map_err(std::io::Error::from)
            .and_then(|_| self.out.write_all(b"\n"));
        if let Err(e) = res {
            log::error!("dropping event: {e}");
        }
    }
}

impl<S: EventSink + ?Sized> EventSink for &mut S {
    fn emit(&mut self, event: &EngineEvent) {
        (**self).emit(event)
    }
}
