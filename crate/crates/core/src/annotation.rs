//! Inter-annotator agreement and majority-vote gold standards.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ExtraFields, Label, LabelSequence, Role, Timeline};

/// One annotator's judgement of one post.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub timeline_id: String,
    pub post_id: String,
    pub annotator_id: String,
    pub label: Label,
    pub role: Role,
    #[serde(flatten, default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub extra: ExtraFields,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AnnotationKey {
    pub timeline_id: String,
    pub post_id: String,
    pub annotator_id: String,
}

/// Annotations keyed by `(timeline, post, annotator)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnnotationSet {
    entries: BTreeMap<AnnotationKey, (Label, Role)>,
}

impl AnnotationSet {
    /// Rejects two records with the same key.
    pub fn from_records(records: impl IntoIterator<Item = AnnotationRecord>) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for r in records {
            let key = AnnotationKey {
                timeline_id: r.timeline_id,
                post_id: r.post_id,
                annotator_id: r.annotator_id,
            };
            if entries.contains_key(&key) {
                return Err(Error::DuplicateRecord(format!(
                    "annotation of post {} in {} by {}",
                    key.post_id, key.timeline_id, key.annotator_id
                )));
            }
            entries.insert(key, (r.label, r.role));
        }
        Ok(Self { entries })
    }

    pub fn to_records(&self) -> Vec<AnnotationRecord> {
        self.entries
            .iter()
            .map(|(k, &(label, role))| AnnotationRecord {
                timeline_id: k.timeline_id.clone(),
                post_id: k.post_id.clone(),
                annotator_id: k.annotator_id.clone(),
                label,
                role,
                extra: ExtraFields::new(),
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, timeline_id: &str, post_id: &str, annotator_id: &str) -> Option<(Label, Role)> {
        self.entries
            .get(&AnnotationKey {
                timeline_id: timeline_id.into(),
                post_id: post_id.into(),
                annotator_id: annotator_id.into(),
            })
            .copied()
    }

    pub fn annotators(&self) -> BTreeSet<&str> {
        self.entries.keys().map(|k| k.annotator_id.as_str()).collect()
    }

    pub fn timeline_ids(&self) -> BTreeSet<&str> {
        self.entries.keys().map(|k| k.timeline_id.as_str()).collect()
    }

    /// Annotators with at least one record in `timeline_id`.
    pub fn annotators_of<'a>(&'a self, timeline_id: &'a str) -> BTreeSet<&'a str> {
        self.records_of(timeline_id)
            .map(|(k, _)| k.annotator_id.as_str())
            .collect()
    }

    fn records_of<'a>(
        &'a self,
        timeline_id: &'a str,
    ) -> impl Iterator<Item = (&'a AnnotationKey, &'a (Label, Role))> + 'a {
        self.entries.iter().filter(move |(k, _)| k.timeline_id == timeline_id)
    }

    /// Per annotated post, the label each covering annotator gave it.
    /// Annotators who cover the timeline but skipped the post count as `O`.
    fn votes(&self) -> BTreeMap<(&str, &str), Vec<Label>> {
        let mut covering: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        let mut given: BTreeMap<(&str, &str), BTreeMap<&str, Label>> = BTreeMap::new();
        for (k, &(label, _)) in &self.entries {
            covering
                .entry(k.timeline_id.as_str())
                .or_default()
                .insert(k.annotator_id.as_str());
            given
                .entry((k.timeline_id.as_str(), k.post_id.as_str()))
                .or_default()
                .insert(k.annotator_id.as_str(), label);
        }
        given
            .into_iter()
            .map(|(post, by_annotator)| {
                let labels = covering[post.0]
                    .iter()
                    .map(|a| by_annotator.get(a).copied().unwrap_or(Label::O))
                    .collect();
                (post, labels)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgreementMode {
    /// Posts every annotator gave the label.
    Perfect,
    /// Posts at least two annotators gave the label.
    Majority,
}

/// Positive agreement for `label`: agreed posts over the union of posts any
/// annotator gave the label. `None` when nobody used the label.
pub fn positive_agreement(ann: &AnnotationSet, label: Label, mode: AgreementMode) -> Result<Option<f64>> {
    for tl in ann.timeline_ids() {
        if ann.annotators_of(tl).len() < 2 {
            return Err(Error::InsufficientAnnotators(tl.to_owned()));
        }
    }
    let mut union = 0usize;
    let mut agreed = 0usize;
    for labels in ann.votes().values() {
        let hits = labels.iter().filter(|&&l| l == label).count();
        if hits == 0 {
            continue;
        }
        union += 1;
        let ok = match mode {
            AgreementMode::Perfect => hits == labels.len(),
            AgreementMode::Majority => hits >= 2,
        };
        if ok {
            agreed += 1;
        }
    }
    Ok((union > 0).then(|| agreed as f64 / union as f64))
}

/// Both agreement ratios for one label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelAgreement {
    pub perfect: Option<f64>,
    pub majority: Option<f64>,
}

/// Agreement ratios for every label, keyed by label name.
pub fn agreement_table(ann: &AnnotationSet) -> Result<BTreeMap<String, LabelAgreement>> {
    Label::ALL
        .iter()
        .map(|&l| {
            Ok((
                l.to_string(),
                LabelAgreement {
                    perfect: positive_agreement(ann, l, AgreementMode::Perfect)?,
                    majority: positive_agreement(ann, l, AgreementMode::Majority)?,
                },
            ))
        })
        .collect()
}

/// Majority vote over one post: `IS` with two or more `IS` votes, else `IE`
/// with two or more `IE` votes, else `O`.
pub fn majority_label(votes: &[Label]) -> Label {
    let count = |l| votes.iter().filter(|&&v| v == l).count();
    if count(Label::IS) >= 2 {
        Label::IS
    } else if count(Label::IE) >= 2 {
        Label::IE
    } else {
        Label::O
    }
}

/// Gold labels for `timeline` by per-post majority vote.
///
/// Every annotator who touched the timeline votes on every post; missing
/// records count as `O`. Roles are kept as auxiliary data: a post gets the
/// role most common among the annotators who voted for the winning label.
pub fn derive_gold(ann: &AnnotationSet, timeline: &Timeline) -> Result<LabelSequence> {
    let tid = timeline.timeline_id.as_str();
    let positions: BTreeMap<&str, usize> = timeline.post_ids().enumerate().map(|(i, p)| (p, i)).collect();
    let annotators: Vec<&str> = ann.annotators_of(tid).into_iter().collect();
    let n = timeline.len();
    let mut votes: Vec<Vec<(Label, Role)>> = vec![Vec::new(); n];
    let mut seen: Vec<BTreeSet<&str>> = vec![BTreeSet::new(); n];
    for (k, &vote) in ann.records_of(tid) {
        let &i = positions.get(k.post_id.as_str()).ok_or_else(|| {
            Error::Alignment(format!(
                "annotation by {} references post {} not in timeline {tid}",
                k.annotator_id, k.post_id
            ))
        })?;
        votes[i].push(vote);
        seen[i].insert(k.annotator_id.as_str());
    }
    for (i, v) in votes.iter_mut().enumerate() {
        let missing = annotators.iter().filter(|a| !seen[i].contains(*a)).count();
        v.extend(std::iter::repeat_n((Label::O, Role::None), missing));
    }

    let mut labels = Vec::with_capacity(n);
    let mut roles = Vec::with_capacity(n);
    for v in &votes {
        let only_labels: Vec<Label> = v.iter().map(|(l, _)| *l).collect();
        let label = majority_label(&only_labels);
        labels.push(label);
        roles.push(gold_role(label, v));
    }
    let mut seq = LabelSequence::new(tid, labels);
    seq.roles = Some(roles);
    Ok(seq)
}

fn gold_role(label: Label, votes: &[(Label, Role)]) -> Role {
    if label == Label::O {
        return Role::None;
    }
    let mut counts: BTreeMap<Role, usize> = BTreeMap::new();
    for (l, r) in votes {
        if *l == label && *r != Role::None {
            *counts.entry(*r).or_default() += 1;
        }
    }
    // Highest count wins; BTreeMap order breaks ties deterministically.
    counts
        .into_iter()
        .fold(None, |best: Option<(Role, usize)>, (r, c)| match best {
            Some((_, bc)) if bc >= c => best,
            _ => Some((r, c)),
        })
        .map_or(Role::InRegion, |(r, _)| r)
}

/// Gold sequences for every timeline, in timeline order.
pub fn aggregate(ann: &AnnotationSet, timelines: &[Timeline]) -> Result<Vec<LabelSequence>> {
    let known: BTreeSet<&str> = timelines.iter().map(|t| t.timeline_id.as_str()).collect();
    if let Some(unknown) = ann.timeline_ids().into_iter().find(|t| !known.contains(t)) {
        return Err(Error::Alignment(format!(
            "annotations reference unknown timeline {unknown}"
        )));
    }
    timelines.iter().map(|t| derive_gold(ann, t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Post;
    use chrono::DateTime;
    use Label::*;

    fn rec(tl: &str, post: &str, annotator: &str, label: Label) -> AnnotationRecord {
        AnnotationRecord {
            timeline_id: tl.into(),
            post_id: post.into(),
            annotator_id: annotator.into(),
            label,
            role: if label == O { Role::None } else { Role::InRegion },
            extra: ExtraFields::new(),
        }
    }

    fn timeline(n: usize) -> Timeline {
        let posts = (0..n)
            .map(|i| {
                Post::new(
                    "u",
                    format!("p{i}"),
                    DateTime::from_timestamp(i as i64 * 60, 0).unwrap(),
                    "",
                )
            })
            .collect();
        Timeline::new("t", "u", DateTime::from_timestamp(0, 0).unwrap().date_naive(), posts).unwrap()
    }

    fn set_from_votes(votes: &[[Label; 3]]) -> AnnotationSet {
        let mut records = Vec::new();
        for (i, v) in votes.iter().enumerate() {
            for (a, &l) in v.iter().enumerate() {
                records.push(rec("t", &format!("p{i}"), &format!("a{a}"), l));
            }
        }
        AnnotationSet::from_records(records).unwrap()
    }

    #[test]
    fn agreement_hand_example() {
        // A1 = {1, 2}, A2 = {2, 3}, A3 = {2} for IS over posts 1..=3.
        let ann = set_from_votes(&[[O, O, O], [IS, O, O], [IS, IS, IS], [O, IS, O]]);
        let perfect = positive_agreement(&ann, IS, AgreementMode::Perfect).unwrap().unwrap();
        let majority = positive_agreement(&ann, IS, AgreementMode::Majority).unwrap().unwrap();
        assert!((perfect - 1.0 / 3.0).abs() < 1e-15);
        assert!((majority - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn identical_annotators_agree_fully() {
        let ann = set_from_votes(&[[IE, IE, IE], [O, O, O], [IS, IS, IS]]);
        for l in Label::ALL {
            assert_eq!(positive_agreement(&ann, l, AgreementMode::Perfect).unwrap(), Some(1.0));
            assert_eq!(positive_agreement(&ann, l, AgreementMode::Majority).unwrap(), Some(1.0));
        }
    }

    #[test]
    fn unused_label_is_undefined() {
        let ann = set_from_votes(&[[O, O, O]]);
        assert_eq!(positive_agreement(&ann, IS, AgreementMode::Perfect).unwrap(), None);
    }

    #[test]
    fn single_annotator_is_rejected() {
        let ann = AnnotationSet::from_records(vec![rec("t", "p0", "a0", IS)]).unwrap();
        assert!(matches!(
            positive_agreement(&ann, IS, AgreementMode::Perfect),
            Err(Error::InsufficientAnnotators(_))
        ));
    }

    #[test]
    fn skipped_posts_count_as_none() {
        // a1 never mentions p0 but covers the timeline through p1.
        let ann = AnnotationSet::from_records(vec![
            rec("t", "p0", "a0", O),
            rec("t", "p1", "a0", IE),
            rec("t", "p1", "a1", IE),
        ])
        .unwrap();
        assert_eq!(positive_agreement(&ann, O, AgreementMode::Perfect).unwrap(), Some(1.0));
        assert_eq!(positive_agreement(&ann, IE, AgreementMode::Perfect).unwrap(), Some(1.0));
    }

    #[test]
    fn majority_votes() {
        assert_eq!(majority_label(&[IS, IS, O]), IS);
        assert_eq!(majority_label(&[IS, IE, O]), O);
        assert_eq!(majority_label(&[IE, IE, IS]), IE);
        assert_eq!(majority_label(&[O, O, O]), O);
    }

    #[test]
    fn gold_from_votes() {
        let ann = set_from_votes(&[[IS, IS, O], [IS, IE, O], [IE, IE, IS], [O, O, O]]);
        let gold = derive_gold(&ann, &timeline(4)).unwrap();
        assert_eq!(gold.labels, vec![IS, O, IE, O]);
        assert_eq!(
            gold.roles.unwrap(),
            vec![Role::InRegion, Role::None, Role::InRegion, Role::None]
        );
    }

    #[test]
    fn unannotated_posts_are_none() {
        let ann = AnnotationSet::from_records(vec![rec("t", "p1", "a0", IE), rec("t", "p1", "a1", IE)]).unwrap();
        let gold = derive_gold(&ann, &timeline(3)).unwrap();
        assert_eq!(gold.labels, vec![O, IE, O]);
    }

    #[test]
    fn unknown_post_is_alignment_error() {
        let ann = AnnotationSet::from_records(vec![rec("t", "p9", "a0", IE)]).unwrap();
        assert!(matches!(derive_gold(&ann, &timeline(3)), Err(Error::Alignment(_))));
    }

    #[test]
    fn duplicate_key_rejected() {
        let r = AnnotationSet::from_records(vec![rec("t", "p0", "a0", IE), rec("t", "p0", "a0", O)]);
        assert!(matches!(r, Err(Error::DuplicateRecord(_))));
    }

    #[test]
    fn gold_roles_follow_agreeing_annotators() {
        let mut records = vec![
            rec("t", "p0", "a0", IE),
            rec("t", "p0", "a1", IE),
            rec("t", "p0", "a2", O),
        ];
        records[0].role = Role::EscalationPeak;
        records[1].role = Role::EscalationPeak;
        let ann = AnnotationSet::from_records(records).unwrap();
        let gold = derive_gold(&ann, &timeline(1)).unwrap();
        assert_eq!(gold.roles.unwrap(), vec![Role::EscalationPeak]);
    }
}
