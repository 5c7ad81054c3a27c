//! Two-window drift detection: a concept is flagged when the MMD^2 between
//! the most recent examples of its current and past windows reaches `tau`.

use std::collections::{BTreeMap, BTreeSet};

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::ConceptId;
use crate::kernels::{mmd_squared, KernelConfig};
use crate::windows::WindowStore;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub tau: f64,
    /// Only the `m` most recent examples of each window enter the statistic.
    pub m: usize,
    /// Concepts with fewer examples than this in either window are skipped.
    pub min_samples: usize,
    /// Run detection every `stride` iterations.
    pub stride: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            tau: 0.04,
            m: 70,
            min_samples: 70,
            stride: 1,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau >= 0.0) {
            return Err(Error::Config(format!("tau must be nonnegative, got {}", self.tau)));
        }
        if self.m < 2 {
            return Err(Error::Config(format!("m must be at least 2, got {}", self.m)));
        }
        if self.stride == 0 {
            return Err(Error::Config("stride must be positive".into()));
        }
        Ok(())
    }

    pub fn runs_at(&self, t: usize) -> bool {
        t.is_multiple_of(self.stride)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub flagged: BTreeSet<ConceptId>,
    pub scores: BTreeMap<ConceptId, f64>,
}

impl DetectionResult {
    pub fn any(&self) -> bool {
        !self.flagged.is_empty()
    }
}

pub fn detect(store: &WindowStore, kcfg: &KernelConfig, dcfg: &DetectorConfig) -> Result<DetectionResult> {
    let mut result = DetectionResult::default();
    let min = dcfg.min_samples.max(1);
    for (c, pair) in store.pairs() {
        if pair.w_cur.len() < min || pair.w_old.len() < min {
            debug!(
                "skipping {c}: {} current / {} past examples",
                pair.w_cur.len(),
                pair.w_old.len()
            );
            result.scores.insert(c.clone(), 0.0);
            continue;
        }
        let score = mmd_squared(pair.w_cur.recent(dcfg.m), pair.w_old.recent(dcfg.m), kcfg)?;
        if score >= dcfg.tau {
            result.flagged.insert(c.clone());
        }
        result.scores.insert(c.clone(), score);
    }
    Ok(result)
}
