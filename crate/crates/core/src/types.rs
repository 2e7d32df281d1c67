//! Domain records shared by every stage: posts, timelines, labels and regions.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shortest timeline the extractor keeps.
pub const MIN_TIMELINE_POSTS: usize = 10;
/// Longest timeline the extractor keeps.
pub const MAX_TIMELINE_POSTS: usize = 150;

/// Unrecognised JSON fields carried through a read/write cycle.
pub type ExtraFields = serde_json::Map<String, serde_json::Value>;

/// A single message posted by a user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Post {
    pub user_id: String,
    pub post_id: String,
    #[serde(with = "utc_seconds")]
    pub timestamp: DateTime<Utc>,
    pub text: String,
    #[serde(flatten, default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub extra: ExtraFields,
}

impl Post {
    pub fn new(
        user_id: impl Into<String>,
        post_id: impl Into<String>,
        timestamp: DateTime<Utc>,
        text: impl Into<String>,
    ) -> Self {
        Self {
            user_id: user_id.into(),
            post_id: post_id.into(),
            timestamp: truncate_to_seconds(timestamp),
            text: text.into(),
            extra: ExtraFields::new(),
        }
    }

    pub fn date(&self) -> NaiveDate {
        self.timestamp.date_naive()
    }

    /// Chronological order with ties broken by post id.
    pub fn chronological_cmp(&self, other: &Post) -> std::cmp::Ordering {
        self.timestamp
            .cmp(&other.timestamp)
            .then_with(|| self.post_id.cmp(&other.post_id))
    }
}

pub(crate) fn truncate_to_seconds(ts: DateTime<Utc>) -> DateTime<Utc> {
    DateTime::from_timestamp(ts.timestamp(), 0).unwrap_or(ts)
}

/// Serialises instants as ISO-8601 with an explicit UTC designator and whole seconds.
pub(crate) mod utc_seconds {
    use chrono::{DateTime, SecondsFormat, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(ts: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&ts.to_rfc3339_opts(SecondsFormat::Secs, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let raw = String::deserialize(d)?;
        let parsed = DateTime::parse_from_rfc3339(&raw)
            .map_err(|e| serde::de::Error::custom(format!("bad timestamp {raw:?}: {e}")))?;
        Ok(super::truncate_to_seconds(parsed.with_timezone(&Utc)))
    }
}

/// Per-post moment-of-change label.
///
/// The derived ordering (`O < IS < IE`) is the serialisation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    O,
    IS,
    IE,
}

impl Label {
    /// Display order used in reports (minority classes first).
    pub const ALL: [Label; 3] = [Label::IS, Label::IE, Label::O];

    /// Dense class index used by classifiers.
    pub fn index(self) -> usize {
        match self {
            Label::O => 0,
            Label::IS => 1,
            Label::IE => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Label> {
        match i {
            0 => Some(Label::O),
            1 => Some(Label::IS),
            2 => Some(Label::IE),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::O => "O",
            Label::IS => "IS",
            Label::IE => "IE",
        }
    }

    pub fn is_change(self) -> bool {
        self != Label::O
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "O" => Ok(Label::O),
            "IS" => Ok(Label::IS),
            "IE" => Ok(Label::IE),
            other => Err(Error::InvalidParameter(format!("unknown label {other:?}"))),
        }
    }
}

/// Auxiliary annotation role of a post inside a moment of change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    SwitchStart,
    EscalationPeak,
    InRegion,
    None,
}

/// A user's posts around one detected change in posting frequency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Timeline {
    pub timeline_id: String,
    pub user_id: String,
    pub anchor: NaiveDate,
    pub posts: Vec<Post>,
}

impl Timeline {
    /// Builds a timeline, putting posts into chronological order.
    pub fn new(
        timeline_id: impl Into<String>,
        user_id: impl Into<String>,
        anchor: NaiveDate,
        mut posts: Vec<Post>,
    ) -> Result<Self> {
        let timeline_id = timeline_id.into();
        let user_id = user_id.into();
        if let Some(p) = posts.iter().find(|p| p.user_id != user_id) {
            return Err(Error::Alignment(format!(
                "timeline {timeline_id}: post {} belongs to user {}, not {user_id}",
                p.post_id, p.user_id
            )));
        }
        posts.sort_by(Post::chronological_cmp);
        Ok(Self {
            timeline_id,
            user_id,
            anchor,
            posts,
        })
    }

    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }

    /// Whether the length is inside the range the extractor enforces.
    pub fn has_standard_length(&self) -> bool {
        (MIN_TIMELINE_POSTS..=MAX_TIMELINE_POSTS).contains(&self.len())
    }

    pub fn post_ids(&self) -> impl Iterator<Item = &str> {
        self.posts.iter().map(|p| p.post_id.as_str())
    }
}

/// Labels for every post of one timeline, gold or predicted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSequence {
    pub timeline_id: String,
    pub labels: Vec<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roles: Option<Vec<Role>>,
    #[serde(flatten, default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub extra: ExtraFields,
}

impl LabelSequence {
    pub fn new(timeline_id: impl Into<String>, labels: Vec<Label>) -> Self {
        Self {
            timeline_id: timeline_id.into(),
            labels,
            roles: None,
            extra: ExtraFields::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Positions carrying `label`, ascending.
    pub fn positions(&self, label: Label) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == label)
            .map(|(i, _)| i)
            .collect()
    }

    /// Errors unless this sequence has one label per post of `timeline`.
    pub fn check_aligned(&self, timeline: &Timeline) -> Result<()> {
        if self.timeline_id != timeline.timeline_id {
            return Err(Error::Alignment(format!(
                "labels for {} checked against timeline {}",
                self.timeline_id, timeline.timeline_id
            )));
        }
        if self.len() != timeline.len() {
            return Err(Error::Alignment(format!(
                "timeline {} has {} posts but {} labels",
                timeline.timeline_id,
                timeline.len(),
                self.len()
            )));
        }
        if let Some(roles) = &self.roles {
            if roles.len() != self.len() {
                return Err(Error::Alignment(format!(
                    "timeline {} has {} labels but {} roles",
                    self.timeline_id,
                    self.len(),
                    roles.len()
                )));
            }
        }
        Ok(())
    }
}

/// A maximal run of one label, `start..=end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Region {
    pub label: Label,
    pub start: usize,
    pub end: usize,
}

impl Region {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Intersection over union of the two index ranges.
    pub fn iou(&self, other: &Region) -> f64 {
        let lo = self.start.max(other.start);
        let hi = self.end.min(other.end);
        let inter = if hi >= lo { hi - lo + 1 } else { 0 };
        let union = self.len() + other.len() - inter;
        inter as f64 / union as f64
    }
}

/// Splits a label sequence into maximal same-label runs.
pub fn extract_regions(labels: &[Label]) -> Result<Vec<Region>> {
    let first = *labels.first().ok_or(Error::EmptySequence)?;
    let mut regions = Vec::new();
    let mut current = Region {
        label: first,
        start: 0,
        end: 0,
    };
    for (i, &label) in labels.iter().enumerate().skip(1) {
        if label == current.label {
            current.end = i;
        } else {
            regions.push(current);
            current = Region {
                label,
                start: i,
                end: i,
            };
        }
    }
    regions.push(current);
    Ok(regions)
}
