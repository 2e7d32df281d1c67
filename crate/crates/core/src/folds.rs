//! Timeline-level cross-validation folds.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maps each timeline to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    k: usize,
    folds: BTreeMap<String, usize>,
}

impl FoldAssignment {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn fold_of(&self, timeline_id: &str) -> Option<usize> {
        self.folds.get(timeline_id).copied()
    }

    /// Timeline ids of fold `fold`, sorted.
    pub fn members(&self, fold: usize) -> Vec<&str> {
        self.folds
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in self.folds.values() {
            sizes[f] += 1;
        }
        sizes
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.folds.iter().map(|(id, &f)| (id.as_str(), f))
    }
}

/// Shuffles timeline ids with a seeded RNG and deals them round-robin into
/// `k` folds. The result depends only on the id set and the seed, not on the
/// order ids are passed in. Duplicate ids are counted once.
pub fn split_folds<S: AsRef<str>>(timeline_ids: &[S], k: usize, seed: u64) -> Result<FoldAssignment> {
    let mut ids: Vec<&str> = timeline_ids.iter().map(AsRef::as_ref).collect();
    ids.sort_unstable();
    ids.dedup();
    if k < 2 || k > ids.len() {
        return Err(Error::InvalidFoldCount { k, ids: ids.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let folds = ids
        .into_iter()
        .enumerate()
        .map(|(i, id)| (id.to_owned(), i % k))
        .collect();
    Ok(FoldAssignment { k, folds })
}
