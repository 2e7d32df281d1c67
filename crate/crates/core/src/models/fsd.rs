//! First-story-detection novelty features.

use serde::{Deserialize, Serialize};

use super::tfidf::SparseVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FsdMode {
    /// Cosine to the centroid of the previous posts.
    Centroid,
    /// Highest cosine to any single previous post.
    Nearest,
}

/// History sizes 1 to 10; the full history is always added as a last feature.
pub const DEFAULT_HISTORY_SIZES: [usize; 10] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];

/// One row per post with a similarity for each history size in `n_list`
/// followed by one for the full preceding history. A history of `n` uses the
/// last `min(n, i)` posts before post `i`. The first post is all zeros, as
/// is any similarity involving a zero vector.
pub fn fsd_features(vectors: &[SparseVector], n_list: &[usize], mode: FsdMode) -> Vec<Vec<f64>> {
    let len = vectors.len();
    let gram: Vec<Vec<f64>> = (0..len)
        .map(|i| {
            (0..len)
                .map(|j| if j <= i { vectors[i].dot(&vectors[j]) } else { 0.0 })
                .collect()
        })
        .collect();
    let g = |i: usize, j: usize| if j <= i { gram[i][j] } else { gram[j][i] };

    // Block sums of the Gram matrix over [a, i) x [a, i), grown backwards.
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        let mut row = vec![0.0; n_list.len() + 1];
        if i > 0 {
            let sizes: Vec<usize> = n_list.iter().map(|&n| n.min(i)).chain(std::iter::once(i)).collect();
            let norm_i = g(i, i).sqrt();
            match mode {
                FsdMode::Centroid => {
                    let mut cross = vec![0.0; i + 1];
                    let mut block = vec![0.0; i + 1];
                    for m in 1..=i {
                        let j = i - m;
                        let inner: f64 = (j + 1..i).map(|l| g(j, l)).sum();
                        cross[m] = cross[m - 1] + g(i, j);
                        block[m] = block[m - 1] + g(j, j) + 2.0 * inner;
                    }
                    for (slot, &m) in row.iter_mut().zip(&sizes) {
                        let den = norm_i * block[m].max(0.0).sqrt();
                        *slot = if m == 0 || den == 0.0 { 0.0 } else { cross[m] / den };
                    }
                }
                FsdMode::Nearest => {
                    let mut best = vec![f64::NEG_INFINITY; i + 1];
                    for m in 1..=i {
                        let j = i - m;
                        let den = norm_i * g(j, j).sqrt();
                        let c = if den == 0.0 { 0.0 } else { g(i, j) / den };
                        best[m] = best[m - 1].max(c);
                    }
                    for (slot, &m) in row.iter_mut().zip(&sizes) {
                        *slot = if m == 0 { 0.0 } else { best[m] };
                    }
                }
            }
        }
        out.push(row);
    }
    out
}
