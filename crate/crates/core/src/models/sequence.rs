//! Context-window classification of posts within a timeline.

use serde::{Deserialize, Serialize};

use super::linear::{class_frequencies, focal_alpha, train_linear, LinearModel, LossKind, TrainConfig};
use super::tfidf::SparseVector;
use crate::error::{Error, Result};
use crate::types::Label;

/// Per-post features of one timeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaFeatureSequence {
    pub timeline_id: String,
    pub features: Vec<Vec<f64>>,
}

impl MetaFeatureSequence {
    pub fn check_len(&self, len: usize) -> Result<()> {
        if self.features.len() != len {
            return Err(Error::Alignment(format!(
                "timeline {}: {} feature rows for {len} posts",
                self.timeline_id,
                self.features.len()
            )));
        }
        Ok(())
    }
}

/// Concatenates each row with the rows at offsets `-radius..=radius`, in
/// that order; positions outside the timeline contribute zeros. Row `i` of
/// the output has dimension `(2 * radius + 1) * dim`.
pub fn with_context(rows: &[SparseVector], dim: usize, radius: usize) -> Vec<SparseVector> {
    if radius == 0 {
        return rows.to_vec();
    }
    let n = rows.len() as isize;
    (0..n)
        .map(|i| {
            let mut entries = Vec::new();
            for (block, off) in (-(radius as isize)..=radius as isize).enumerate() {
                let j = i + off;
                if (0..n).contains(&j) {
                    entries.extend(rows[j as usize].shifted(block * dim).entries());
                }
            }
            SparseVector::from_entries(entries)
        })
        .collect()
}

/// How the sequence classifier weights its loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossChoice {
    CrossEntropy,
    /// Focal loss with `alpha_t = sqrt(1 / p_t)` from training frequencies.
    Focal {
        gamma: f64,
    },
}

impl LossChoice {
    pub fn resolve(self, targets: &[usize], n_classes: usize) -> LossKind {
        match self {
            LossChoice::CrossEntropy => LossKind::CrossEntropy,
            LossChoice::Focal { gamma } => LossKind::Focal {
                gamma,
                alpha: focal_alpha(&class_frequencies(targets, n_classes)),
            },
        }
    }
}

/// A timeline's per-post features with its gold labels.
#[derive(Debug, Clone, Copy)]
pub struct LabeledSequence<'a> {
    pub rows: &'a [SparseVector],
    pub labels: &'a [Label],
}

/// Trains one linear model on windowed features of the training timelines
/// and labels every post of the test timelines.
pub fn sequence_classifier(
    train: &[LabeledSequence<'_>],
    test: &[&[SparseVector]],
    dim: usize,
    radius: usize,
    loss: LossChoice,
    config: &TrainConfig,
) -> Result<(LinearModel, Vec<Vec<Label>>)> {
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for seq in train {
        if seq.rows.len() != seq.labels.len() {
            return Err(Error::Alignment(format!(
                "{} feature rows vs {} labels",
                seq.rows.len(),
                seq.labels.len()
            )));
        }
        rows.extend(with_context(seq.rows, dim, radius));
        targets.extend(seq.labels.iter().map(|l| l.index()));
    }
    let width = (2 * radius + 1) * dim;
    let model = train_linear(&rows, &targets, width, 3, loss.resolve(&targets, 3), config)?;
    let preds = test
        .iter()
        .map(|t| {
            with_context(t, dim, radius)
                .iter()
                .map(|x| Label::from_index(model.predict(x)).unwrap_or(Label::O))
                .collect()
        })
        .collect();
    Ok((model, preds))
}
