use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{check_lengths, label_macro, ratio, LabelTable, SequencePair};
use crate::error::Result;
use crate::types::Label;

/// Precision, recall and F1 for one class, plus its gold support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub support: usize,
}

pub type PostLevelScores = LabelTable<ClassScores>;

#[derive(Default, Clone, Copy)]
struct Counts {
    tp: usize,
    fp: usize,
    fn_: usize,
}

fn scores_from_counts(counts: &[Counts; 3]) -> PostLevelScores {
    let mut per_label = BTreeMap::new();
    let mut in_play = Vec::new();
    for label in Label::ALL {
        let c = counts[label.index()];
        let scores = ClassScores {
            precision: ratio(c.tp, c.tp + c.fp),
            recall: ratio(c.tp, c.tp + c.fn_),
            f1: ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_),
            support: c.tp + c.fn_,
        };
        in_play.push((c.tp + c.fp + c.fn_ > 0, scores));
        per_label.insert(label, scores);
    }
    let macro_avg = ClassScores {
        precision: label_macro(in_play.iter().map(|(p, s)| (*p, s.precision))),
        recall: label_macro(in_play.iter().map(|(p, s)| (*p, s.recall))),
        f1: label_macro(in_play.iter().map(|(p, s)| (*p, s.f1))),
        support: in_play.iter().map(|(_, s)| s.support).sum(),
    };
    PostLevelScores { per_label, macro_avg }
}

fn accumulate(counts: &mut [Counts; 3], gold: &[Label], pred: &[Label]) {
    for (&g, &p) in gold.iter().zip(pred) {
        if g == p {
            counts[g.index()].tp += 1;
        } else {
            counts[p.index()].fp += 1;
            counts[g.index()].fn_ += 1;
        }
    }
}

/// One-vs-rest scores pooled over every post of every timeline.
pub fn post_level(pairs: &[SequencePair<'_>]) -> PostLevelScores {
    let mut counts = [Counts::default(); 3];
    for p in pairs {
        accumulate(&mut counts, p.gold, p.pred);
    }
    scores_from_counts(&counts)
}

/// Post-level scores of a single timeline.
pub fn post_level_single(gold: &[Label], pred: &[Label]) -> Result<PostLevelScores> {
    check_lengths("<single>", gold, pred)?;
    let mut counts = [Counts::default(); 3];
    accumulate(&mut counts, gold, pred);
    Ok(scores_from_counts(&counts))
}
