//! Sparse vectors and tf-idf featurization.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse vector with entries sorted by index and no explicit zeros.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    /// Sorts entries, sums duplicates and drops zeros.
    pub fn from_entries(mut entries: Vec<(usize, f64)>) -> Self {
        entries.sort_by_key(|e| e.0);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        for (i, v) in entries {
            match out.last_mut() {
                Some(last) if last.0 == i => last.1 += v,
                _ => out.push((i, v)),
            }
        }
        out.retain(|e| e.1 != 0.0);
        Self { entries: out }
    }

    pub fn from_dense(values: &[f64]) -> Self {
        Self {
            entries: values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (i, *v))
                .collect(),
        }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for &(i, v) in &self.entries {
            if i < dim {
                out[i] = v;
            }
        }
        out
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j, mut s) = (0, 0, 0.0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    s += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        s
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| v * dense[i]).sum()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt()
    }

    /// Cosine similarity, 0 when either vector is zero.
    pub fn cosine(&self, other: &SparseVector) -> f64 {
        let d = self.norm() * other.norm();
        if d == 0.0 {
            0.0
        } else {
            self.dot(other) / d
        }
    }

    /// Copy with every index shifted by `offset`.
    pub fn shifted(&self, offset: usize) -> SparseVector {
        SparseVector {
            entries: self.entries.iter().map(|&(i, v)| (i + offset, v)).collect(),
        }
    }
}

/// Token → (column, document frequency), fitted on a training corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfVocabulary {
    terms: BTreeMap<String, (usize, usize)>,
    idf: Vec<f64>,
    n_docs: usize,
}

impl TfidfVocabulary {
    /// Fits on tokenized documents. With `max_features`, keeps the terms of
    /// highest document frequency (ties broken alphabetically). Columns are
    /// assigned in alphabetical order of the kept terms.
    pub fn fit<D: AsRef<[String]>>(docs: &[D], max_features: Option<usize>) -> Result<Self> {
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for doc in docs {
            let mut seen: Vec<&str> = doc.as_ref().iter().map(String::as_str).collect();
            seen.sort_unstable();
            seen.dedup();
            for t in seen {
                *df.entry(t).or_default() += 1;
            }
        }
        if df.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        let mut kept: Vec<(&str, usize)> = df.into_iter().collect();
        if let Some(cap) = max_features {
            if cap == 0 {
                return Err(Error::InvalidParameter("max_features must be positive".into()));
            }
            if kept.len() > cap {
                kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
                kept.truncate(cap);
                kept.sort_by(|a, b| a.0.cmp(b.0));
            }
        }
        let n = docs.len();
        let idf = kept
            .iter()
            .map(|&(_, d)| ((1.0 + n as f64) / (1.0 + d as f64)).ln() + 1.0)
            .collect();
        let terms = kept
            .into_iter()
            .enumerate()
            .map(|(i, (t, d))| (t.to_owned(), (i, d)))
            .collect();
        Ok(Self { terms, idf, n_docs: n })
    }

    pub fn len(&self) -> usize {
        self.idf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.idf.is_empty()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.terms.get(token).map(|t| t.0)
    }

    pub fn document_frequency(&self, token: &str) -> Option<usize> {
        self.terms.get(token).map(|t| t.1)
    }

    pub fn idf(&self, token: &str) -> Option<f64> {
        self.index_of(token).map(|i| self.idf[i])
    }

    /// Raw term counts times idf, L2-normalized. Unknown tokens are ignored.
    pub fn transform(&self, tokens: &[String]) -> SparseVector {
        let entries = tokens
            .iter()
            .filter_map(|t| self.index_of(t))
            .map(|i| (i, self.idf[i]))
            .collect();
        let mut v = SparseVector::from_entries(entries);
        let norm = v.norm();
        if norm > 0.0 {
            for e in &mut v.entries {
                e.1 /= norm;
            }
        }
        v
    }
}

/// Featurizes tokenized documents, fitting a vocabulary unless one is given.
pub fn tfidf_featurize<D: AsRef<[String]>>(
    docs: &[D],
    vocab: Option<&TfidfVocabulary>,
) -> Result<(Vec<SparseVector>, TfidfVocabulary)> {
    let vocab = match vocab {
        Some(v) => v.clone(),
        None => TfidfVocabulary::fit(docs, None)?,
    };
    let vectors = docs.iter().map(|d| vocab.transform(d.as_ref())).collect();
    Ok((vectors, vocab))
}
