use serde::{Deserialize, Serialize};

use super::{check_lengths, mean_defined, SequencePair};
use crate::error::Result;
use crate::types::{extract_regions, Label, Region};

/// Precision- and recall-oriented region coverage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageScore {
    pub c_p: Option<f64>,
    pub c_r: Option<f64>,
}

/// Size-weighted best IoU of each `reference` region against `candidates`.
fn weighted_best_overlap(reference: &[Region], candidates: &[Region]) -> Option<f64> {
    let total: usize = reference.iter().map(Region::len).sum();
    if total == 0 {
        return None;
    }
    let covered: f64 = reference
        .iter()
        .map(|r| {
            let best = candidates.iter().map(|c| r.iou(c)).fold(0.0, f64::max);
            r.len() as f64 * best
        })
        .sum();
    Some(covered / total as f64)
}

fn regions_of(labels: &[Label], label: Label) -> Result<Vec<Region>> {
    if labels.is_empty() {
        return Ok(Vec::new());
    }
    Ok(extract_regions(labels)?
        .into_iter()
        .filter(|r| r.label == label)
        .collect())
}

/// `(C_p, C_r)` for `label` on one timeline.
pub fn coverage(gold: &[Label], pred: &[Label], label: Label) -> Result<CoverageScore> {
    check_lengths("<single>", gold, pred)?;
    let g = regions_of(gold, label)?;
    let p = regions_of(pred, label)?;
    Ok(CoverageScore {
        c_p: weighted_best_overlap(&p, &g),
        c_r: weighted_best_overlap(&g, &p),
    })
}

/// Per-timeline coverage averaged over the timelines where each is defined.
pub fn coverage_macro(pairs: &[SequencePair<'_>], label: Label) -> Result<CoverageScore> {
    let scores = pairs
        .iter()
        .map(|p| coverage(p.gold, p.pred, label))
        .collect::<Result<Vec<_>>>()?;
    Ok(CoverageScore {
        c_p: mean_defined(scores.iter().map(|s| s.c_p)),
        c_r: mean_defined(scores.iter().map(|s| s.c_r)),
    })
}
