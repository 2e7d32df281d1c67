//! Which bigrams separate correctly identified from missed posts.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::linear::{train_linear, LossKind, TrainConfig};
use super::text::{bigrams, tokenize};
use super::tfidf::SparseVector;
use crate::error::{Error, Result};
use crate::types::Post;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BigramWeight {
    pub bigram: String,
    /// Positive values favour the true-positive set.
    pub coefficient: f64,
}

/// Full-batch settings for the bigram regression.
pub fn bigram_train_config() -> TrainConfig {
    TrainConfig {
        epochs: 300,
        batch_size: usize::MAX,
        learning_rate: 0.05,
        l2: 1e-3,
        seed: 0,
    }
}

/// Fits a logistic regression on bigram indicators separating the posts in
/// `tp_ids` (class 1) from those in `fn_ids` (class 0) and returns every
/// bigram with its coefficient, highest first.
pub fn error_correlation_bigrams(
    posts: &[Post],
    tp_ids: &BTreeSet<String>,
    fn_ids: &BTreeSet<String>,
    config: &TrainConfig,
) -> Result<Vec<BigramWeight>> {
    if tp_ids.is_empty() || fn_ids.is_empty() {
        return Err(Error::InsufficientData(format!(
            "{} true-positive and {} false-negative posts",
            tp_ids.len(),
            fn_ids.len()
        )));
    }
    if let Some(id) = tp_ids.intersection(fn_ids).next() {
        return Err(Error::InvalidParameter(format!(
            "post {id} is both a true positive and a false negative"
        )));
    }
    let by_id: BTreeMap<&str, &Post> = posts.iter().map(|p| (p.post_id.as_str(), p)).collect();
    let mut docs: Vec<BTreeSet<String>> = Vec::new();
    let mut targets = Vec::new();
    for (ids, class) in [(fn_ids, 0usize), (tp_ids, 1)] {
        for id in ids {
            let post = by_id
                .get(id.as_str())
                .ok_or_else(|| Error::Alignment(format!("unknown post {id}")))?;
            docs.push(bigrams(&tokenize(&post.text)).into_iter().collect());
            targets.push(class);
        }
    }
    let vocab: BTreeSet<&String> = docs.iter().flatten().collect();
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let index: BTreeMap<&String, usize> = vocab.iter().enumerate().map(|(i, b)| (*b, i)).collect();
    let rows: Vec<SparseVector> = docs
        .iter()
        .map(|d| SparseVector::from_entries(d.iter().map(|b| (index[b], 1.0)).collect()))
        .collect();
    let model = train_linear(&rows, &targets, index.len(), 2, LossKind::CrossEntropy, config)?;
    let mut out: Vec<BigramWeight> = index
        .iter()
        .map(|(b, &i)| BigramWeight {
            bigram: (*b).clone(),
            coefficient: model.weight(1, i) - model.weight(0, i),
        })
        .collect();
    out.sort_by(|a, b| {
        b.coefficient
            .total_cmp(&a.coefficient)
            .then_with(|| a.bigram.cmp(&b.bigram))
    });
    Ok(out)
}
