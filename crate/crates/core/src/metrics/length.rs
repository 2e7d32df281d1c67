use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ratio, SequencePair};
use crate::error::Result;
use crate::types::{extract_regions, Label};

/// How gold regions are grouped by length.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum LengthBuckets {
    /// One bucket per distinct region length.
    #[default]
    Exact,
    /// Ascending lower bounds; bucket `k` holds lengths in
    /// `[edges[k], edges[k + 1])`, the last one is open-ended.
    Edges(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketRecall {
    pub bucket: String,
    pub min_len: usize,
    pub max_len: Option<usize>,
    pub regions: usize,
    pub posts: usize,
    pub correct: usize,
    pub recall: Option<f64>,
}

impl LengthBuckets {
    /// `(min, max, name)` of the bucket holding `len`, if any.
    fn bucket_of(&self, len: usize) -> Option<(usize, Option<usize>, String)> {
        match self {
            LengthBuckets::Exact => Some((len, Some(len), len.to_string())),
            LengthBuckets::Edges(edges) => {
                let k = edges.iter().rposition(|&e| e <= len)?;
                Some(match edges.get(k + 1) {
                    Some(&next) if next - 1 == edges[k] => (edges[k], Some(edges[k]), edges[k].to_string()),
                    Some(&next) => (edges[k], Some(next - 1), format!("{}-{}", edges[k], next - 1)),
                    None => (edges[k], None, format!("{}+", edges[k])),
                })
            }
        }
    }
}

/// Recall of `label` over the posts of gold regions, grouped by the length
/// of the region each post belongs to. Buckets are ordered by length.
pub fn recall_by_region_length(
    pairs: &[SequencePair<'_>],
    label: Label,
    buckets: &LengthBuckets,
) -> Result<Vec<BucketRecall>> {
    let mut table: BTreeMap<usize, BucketRecall> = BTreeMap::new();
    for p in pairs {
        if p.gold.is_empty() {
            continue;
        }
        for region in extract_regions(p.gold)?.into_iter().filter(|r| r.label == label) {
            let Some((min_len, max_len, name)) = buckets.bucket_of(region.len()) else {
                continue;
            };
            let correct = p.pred[region.start..=region.end]
                .iter()
                .filter(|&&l| l == label)
                .count();
            let entry = table.entry(min_len).or_insert_with(|| BucketRecall {
                bucket: name,
                min_len,
                max_len,
                regions: 0,
                posts: 0,
                correct: 0,
                recall: None,
            });
            entry.regions += 1;
            entry.posts += region.len();
            entry.correct += correct;
        }
    }
    Ok(table
        .into_values()
        .map(|mut b| {
            b.recall = ratio(b.correct, b.posts);
            b
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::*;

    fn pair<'a>(gold: &'a [Label], pred: &'a [Label]) -> SequencePair<'a> {
        SequencePair {
            timeline_id: "t",
            gold,
            pred,
        }
    }

    #[test]
    fn half_recalled_region() {
        let g = [O, IE, IE, IE, IE, O];
        let p = [O, IE, O, IE, O, O];
        let t = recall_by_region_length(&[pair(&g, &p)], IE, &LengthBuckets::Exact).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].bucket, "4");
        assert_eq!(t[0].recall, Some(0.5));
    }

    #[test]
    fn no_gold_regions() {
        let g = [O, O, IS];
        let t = recall_by_region_length(&[pair(&g, &g)], IE, &LengthBuckets::Exact).unwrap();
        assert!(t.is_empty());
    }

    #[test]
    fn perfect_predictions_and_edges() {
        let g = [IE, O, IE, IE, O, IE, IE, IE, IE, IE, O];
        let buckets = LengthBuckets::Edges(vec![1, 2, 4]);
        let t = recall_by_region_length(&[pair(&g, &g)], IE, &buckets).unwrap();
        let names: Vec<&str> = t.iter().map(|b| b.bucket.as_str()).collect();
        assert_eq!(names, ["1", "2-3", "4+"]);
        assert!(t.iter().all(|b| b.recall == Some(1.0)));
        assert_eq!(t[2].posts, 5);
    }
}
