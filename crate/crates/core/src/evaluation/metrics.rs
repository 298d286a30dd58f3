use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

/// Precision, recall and F1 from raw counts; any 0/0 is taken as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn prf1(tp: usize, fp: usize, fn_: usize) -> Prf1 {
    let ratio = |num: f64, den: f64| if den == 0.0 { 0.0 } else { num / den };
    let tp = tp as f64;
    let precision = ratio(tp, tp + fp as f64);
    let recall = ratio(tp, tp + fn_ as f64);
    Prf1 {
        precision,
        recall,
        f1: ratio(2.0 * precision * recall, precision + recall),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeMetrics {
    pub appliance_id: String,
    pub mode_id: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Events whose true mode is this one.
    pub support: usize,
}

/// Counts of (true mode, predicted mode) pairs. A `None` on either side
/// stands for "no event": a missed activation or a spurious detection.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Confusion {
    counts: BTreeMap<(Option<String>, Option<String>), usize>,
}

impl Confusion {
    pub fn add(&mut self, truth: Option<&str>, predicted: Option<&str>) {
        *self
            .counts
            .entry((truth.map(str::to_owned), predicted.map(str::to_owned)))
            .or_default() += 1;
    }

    pub fn merge(&mut self, other: &Confusion) {
        for (k, v) in &other.counts {
            *self.counts.entry(k.clone()).or_default() += v;
        }
    }

    pub fn count(&self, truth: Option<&str>, predicted: Option<&str>) -> usize {
        self.counts
            .get(&(truth.map(str::to_owned), predicted.map(str::to_owned)))
            .copied()
            .unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn modes(&self) -> BTreeSet<String> {
        self.counts
            .keys()
            .flat_map(|(t, p)| [t.clone(), p.clone()])
            .flatten()
            .collect()
    }

    /// One-vs-rest metrics for `mode`.
    pub fn metrics(&self, appliance_id: &str, mode: &str) -> ModeMetrics {
        let (mut tp, mut fp, mut fn_) = (0, 0, 0);
        for ((t, p), &c) in &self.counts {
            let t_hit = t.as_deref() == Some(mode);
            let p_hit = p.as_deref() == Some(mode);
            match (t_hit, p_hit) {
                (true, true) => tp += c,
                (false, true) => fp += c,
                (true, false) => fn_ += c,
                (false, false) => {}
            }
        }
        let m = prf1(tp, fp, fn_);
        ModeMetrics {
            appliance_id: appliance_id.to_owned(),
            mode_id: mode.to_owned(),
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            support: tp + fn_,
        }
    }
}
