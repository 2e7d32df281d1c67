//! Post-level, windowed and coverage-based evaluation.
//!
//! Undefined ratios (zero denominators) are `None` throughout. Averages over
//! timelines skip `None`; averages over labels count a `None` as zero for any
//! label that occurs in the gold or predicted data, and skip labels that
//! occur in neither.

mod coverage;
mod length;
mod post_level;
mod report;
mod windowed;

pub use coverage::{coverage, coverage_macro, CoverageScore};
pub use length::{recall_by_region_length, BucketRecall, LengthBuckets};
pub use post_level::{post_level, post_level_single, ClassScores, PostLevelScores};
pub use report::{evaluate, render_table, EvaluationConfig, LengthAnalysis, MetricsReport, TimelineDetail};
pub use windowed::{matched_within_window, windowed, windowed_macro, WindowedScore};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Label, LabelSequence};

/// Per-label values plus their label-level macro average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelTable<T> {
    #[serde(flatten)]
    pub per_label: BTreeMap<Label, T>,
    #[serde(rename = "macro")]
    pub macro_avg: T,
}

impl<T> LabelTable<T> {
    /// Panics if `label` was not evaluated.
    pub fn label(&self, label: Label) -> &T {
        &self.per_label[&label]
    }
}

/// A gold sequence with its prediction, checked to be the same length.
#[derive(Debug, Clone, Copy)]
pub struct SequencePair<'a> {
    pub timeline_id: &'a str,
    pub gold: &'a [Label],
    pub pred: &'a [Label],
}

/// Matches predictions to gold by timeline id, sorted by id.
///
/// Every gold timeline needs exactly one prediction of equal length and no
/// prediction may refer to a timeline missing from the gold data.
pub fn pair_sequences<'a>(gold: &'a [LabelSequence], pred: &'a [LabelSequence]) -> Result<Vec<SequencePair<'a>>> {
    let mut preds: BTreeMap<&str, &LabelSequence> = BTreeMap::new();
    for p in pred {
        if preds.insert(p.timeline_id.as_str(), p).is_some() {
            return Err(Error::Alignment(format!("duplicate prediction for {}", p.timeline_id)));
        }
    }
    let mut golds: BTreeMap<&str, &LabelSequence> = BTreeMap::new();
    for g in gold {
        if golds.insert(g.timeline_id.as_str(), g).is_some() {
            return Err(Error::Alignment(format!(
                "duplicate gold sequence for {}",
                g.timeline_id
            )));
        }
    }
    if let Some(extra) = preds.keys().find(|id| !golds.contains_key(*id)) {
        return Err(Error::Alignment(format!("prediction for unknown timeline {extra}")));
    }
    golds
        .into_iter()
        .map(|(id, g)| {
            let p = preds
                .get(id)
                .ok_or_else(|| Error::Alignment(format!("no prediction for timeline {id}")))?;
            check_lengths(id, &g.labels, &p.labels)?;
            Ok(SequencePair {
                timeline_id: id,
                gold: &g.labels,
                pred: &p.labels,
            })
        })
        .collect()
}

pub(crate) fn check_lengths(id: &str, gold: &[Label], pred: &[Label]) -> Result<()> {
    if gold.len() != pred.len() {
        return Err(Error::Alignment(format!(
            "timeline {id}: {} gold labels vs {} predicted",
            gold.len(),
            pred.len()
        )));
    }
    Ok(())
}

pub(crate) fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Mean of the defined values; `None` if there are none.
pub(crate) fn mean_defined(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values
        .into_iter()
        .flatten()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Mean over labels in play, with undefined values counted as zero.
pub(crate) fn label_macro(values: impl IntoIterator<Item = (bool, Option<f64>)>) -> Option<f64> {
    let (sum, n) = values
        .into_iter()
        .filter(|(in_play, _)| *in_play)
        .fold((0.0, 0usize), |(s, n), (_, v)| (s + v.unwrap_or(0.0), n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Whether `label` occurs anywhere in the gold or predicted sequences.
pub(crate) fn label_in_play(pairs: &[SequencePair<'_>], label: Label) -> bool {
    pairs.iter().any(|p| p.gold.contains(&label) || p.pred.contains(&label))
}
