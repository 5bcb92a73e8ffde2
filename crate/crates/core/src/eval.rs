//! Confusion counts, detection metrics and first-detection latency tables.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Seconds after an attack's end during which a flag still counts as a detection.
pub const DEFAULT_GRACE_S: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("flagged second {0} is outside the evaluable range")]
    FlagOutsideRange(usize),
    #[error("labels ({labels}) and evaluable mask ({mask}) differ in length")]
    LengthMismatch { labels: usize, mask: usize },
    #[error("all confusion counts are zero")]
    EmptyCounts,
}

pub type Result<T> = std::result::Result<T, EvalError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Per-second comparison over evaluable seconds only.
pub fn confusion(
    flagged: &[usize],
    labels: &[bool],
    evaluable: &[bool],
) -> Result<ConfusionCounts> {
    if labels.len() != evaluable.len() {
        return Err(EvalError::LengthMismatch {
            labels: labels.len(),
            mask: evaluable.len(),
        });
    }
    let mut is_flagged = vec![false; labels.len()];
    for &t in flagged {
        if !evaluable.get(t).copied().unwrap_or(false) {
            return Err(EvalError::FlagOutsideRange(t));
        }
        is_flagged[t] = true;
    }
    let mut c = ConfusionCounts::default();
    for t in (0..labels.len()).filter(|&t| evaluable[t]) {
        match (is_flagged[t], labels[t]) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Metrics; `None` marks a value whose denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub accuracy: Option<f64>,
}

pub fn metrics(c: &ConfusionCounts) -> Result<Metrics> {
    if c.total() == 0 {
        return Err(EvalError::EmptyCounts);
    }
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    Ok(Metrics {
        precision,
        recall,
        f1,
        accuracy: ratio(c.tp + c.tn, c.total()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyEntry {
    pub attack_start: f64,
    pub first_detection: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LatencyTable {
    pub rows: Vec<LatencyEntry>,
    /// Flags inside no attack window.
    pub false_positives: Vec<usize>,
}

/// First flag in `[floor(start), end + grace]` for each attack, plus unattributed flags.
pub fn latency(flagged: &[usize], attacks: &[(f64, f64)], grace: f64) -> LatencyTable {
    let mut sorted = flagged.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let covers = |t: usize, &(start, end): &(f64, f64)| {
        let t = t as f64;
        t >= start.floor() && t <= end + grace
    };
    let rows = attacks
        .iter()
        .map(|a| LatencyEntry {
            attack_start: a.0,
            first_detection: sorted.iter().copied().find(|&t| covers(t, a)),
        })
        .collect();
    let false_positives = sorted
        .iter()
        .copied()
        .filter(|&t| !attacks.iter().any(|a| covers(t, a)))
        .collect();
    LatencyTable {
        rows,
        false_positives,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub detector: String,
    pub feature: String,
    pub thresholds: BTreeMap<String, f64>,
    pub counts: Option<ConfusionCounts>,
    pub metrics: Option<Metrics>,
    pub latency: Vec<LatencyEntry>,
    pub false_positives: Vec<usize>,
    pub flagged: Vec<usize>,
}

impl DetectionReport {
    /// Builds a report; confusion metrics are included only when `with_confusion` is set.
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        detector: &str,
        feature: &str,
        thresholds: BTreeMap<String, f64>,
        flagged: &[usize],
        labels: &[bool],
        evaluable: &[bool],
        attacks: &[(f64, f64)],
        with_confusion: bool,
    ) -> Result<Self> {
        let mut flagged = flagged.to_vec();
        flagged.sort_unstable();
        flagged.dedup();
        let (counts, metrics) = if with_confusion {
            let c = confusion(&flagged, labels, evaluable)?;
            let m = if c.total() > 0 {
                Some(metrics(&c)?)
            } else {
                None
            };
            (Some(c), m)
        } else {
            (None, None)
        };
        let table = latency(&flagged, attacks, DEFAULT_GRACE_S);
        Ok(DetectionReport {
            detector: detector.to_string(),
            feature: feature.to_string(),
            thresholds,
            counts,
            metrics,
            latency: table.rows,
            false_positives: table.false_positives,
            flagged,
        })
    }
}
