use serde::{Deserialize, Serialize};

use super::{check_lengths, mean_defined, ratio, SequencePair};
use crate::error::Result;
use crate::types::Label;

/// Window-tolerant precision and recall.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowedScore {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

/// Size of a maximum one-to-one matching between two ascending position
/// lists where a pair may match when the positions differ by at most `w`.
///
/// A single left-to-right sweep is optimal here: compatibility is an
/// interval condition on a line, so matching the leftmost compatible pair
/// never blocks a larger matching.
pub fn matched_within_window(gold: &[usize], pred: &[usize], w: usize) -> usize {
    let (mut i, mut j, mut matched) = (0, 0, 0);
    while i < gold.len() && j < pred.len() {
        if pred[j] + w < gold[i] {
            j += 1;
        } else if gold[i] + w < pred[j] {
            i += 1;
        } else {
            matched += 1;
            i += 1;
            j += 1;
        }
    }
    matched
}

fn positions(labels: &[Label], label: Label) -> Vec<usize> {
    labels
        .iter()
        .enumerate()
        .filter_map(|(i, &l)| (l == label).then_some(i))
        .collect()
}

/// `(P_w, R_w)` for `label` on one timeline.
pub fn windowed(gold: &[Label], pred: &[Label], label: Label, w: usize) -> Result<WindowedScore> {
    check_lengths("<single>", gold, pred)?;
    let g = positions(gold, label);
    let p = positions(pred, label);
    let tp = matched_within_window(&g, &p, w);
    Ok(WindowedScore {
        precision: ratio(tp, p.len()),
        recall: ratio(tp, g.len()),
    })
}

/// Per-timeline windowed scores averaged over the timelines where each is defined.
pub fn windowed_macro(pairs: &[SequencePair<'_>], label: Label, w: usize) -> Result<WindowedScore> {
    let scores = pairs
        .iter()
        .map(|p| windowed(p.gold, p.pred, label, w))
        .collect::<Result<Vec<_>>>()?;
    Ok(WindowedScore {
        precision: mean_defined(scores.iter().map(|s| s.precision)),
        recall: mean_defined(scores.iter().map(|s| s.recall)),
    })
}
