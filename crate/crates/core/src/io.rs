//! JSON Lines persistence for posts, timelines, labels and annotations, plus
//! single-document JSON for reports.
//!
//! Every record type keeps unrecognised fields in an `extra` map so that
//! foreign files survive a read/write cycle. [`Strictness::Strict`] turns
//! those fields into parse errors instead.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::annotation::AnnotationRecord;
use crate::error::{Error, Result};
use crate::types::{ExtraFields, LabelSequence, Post, Timeline};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    /// Unknown fields are kept.
    #[default]
    Lenient,
    /// Unknown fields are rejected.
    Strict,
}

/// Records that may carry unrecognised fields.
pub trait Record: Serialize + DeserializeOwned {
    fn extra(&self) -> &ExtraFields;
}

impl Record for Post {
    fn extra(&self) -> &ExtraFields {
        &self.extra
    }
}

impl Record for LabelSequence {
    fn extra(&self) -> &ExtraFields {
        &self.extra
    }
}

impl Record for AnnotationRecord {
    fn extra(&self) -> &ExtraFields {
        &self.extra
    }
}

/// On-disk form of a timeline: posts are referenced by id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelineRecord {
    pub timeline_id: String,
    pub user_id: String,
    pub anchor: NaiveDate,
    pub post_ids: Vec<String>,
    #[serde(flatten, default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub extra: ExtraFields,
}

impl Record for TimelineRecord {
    fn extra(&self) -> &ExtraFields {
        &self.extra
    }
}

impl From<&Timeline> for TimelineRecord {
    fn from(t: &Timeline) -> Self {
        Self {
            timeline_id: t.timeline_id.clone(),
            user_id: t.user_id.clone(),
            anchor: t.anchor,
            post_ids: t.post_ids().map(str::to_owned).collect(),
            extra: ExtraFields::new(),
        }
    }
}

/// Parses one JSON record per non-blank line.
pub fn parse_jsonl<T: Record>(reader: impl BufRead, strictness: Strictness) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::parse(line_no, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line).map_err(|e| Error::parse(line_no, e.to_string()))?;
        if strictness == Strictness::Strict && !record.extra().is_empty() {
            let keys: Vec<&str> = record.extra().keys().map(String::as_str).collect();
            return Err(Error::parse(line_no, format!("unknown fields {keys:?}")));
        }
        out.push(record);
    }
    Ok(out)
}

/// Writes one compact JSON record per line.
pub fn write_jsonl<T: Serialize>(mut writer: impl Write, records: &[T]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn read_file<T: Record>(path: &Path, strictness: Strictness) -> Result<Vec<T>> {
    parse_jsonl(open(path)?, strictness)
}

fn write_file<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_jsonl(BufWriter::new(file), records).map_err(|e| Error::io(path, e))
}

/// Reads a posts file, rejecting duplicate post ids.
pub fn read_posts(path: &Path, strictness: Strictness) -> Result<Vec<Post>> {
    let posts: Vec<Post> = read_file(path, strictness)?;
    check_unique_posts(&posts)?;
    Ok(posts)
}

pub(crate) fn check_unique_posts(posts: &[Post]) -> Result<()> {
    let mut seen = HashMap::with_capacity(posts.len());
    for p in posts {
        if seen.insert(p.post_id.as_str(), ()).is_some() {
            return Err(Error::DuplicateRecord(format!("post {}", p.post_id)));
        }
    }
    Ok(())
}

pub fn write_posts(path: &Path, posts: &[Post]) -> Result<()> {
    write_file(path, posts)
}

pub fn read_timeline_records(path: &Path, strictness: Strictness) -> Result<Vec<TimelineRecord>> {
    read_file(path, strictness)
}

/// Resolves timeline records against the posts they reference.
///
/// Post ids must exist, belong to the timeline's user and be listed in
/// chronological order, so that label files stay index-aligned.
pub fn resolve_timelines(records: Vec<TimelineRecord>, posts: &[Post]) -> Result<Vec<Timeline>> {
    let by_id: HashMap<&str, &Post> = posts.iter().map(|p| (p.post_id.as_str(), p)).collect();
    let mut seen = HashMap::new();
    let mut out = Vec::with_capacity(records.len());
    for rec in records {
        if seen.insert(rec.timeline_id.clone(), ()).is_some() {
            return Err(Error::DuplicateRecord(format!("timeline {}", rec.timeline_id)));
        }
        if rec.post_ids.is_empty() {
            return Err(Error::Alignment(format!("timeline {} has no posts", rec.timeline_id)));
        }
        let mut tl_posts = Vec::with_capacity(rec.post_ids.len());
        for pid in &rec.post_ids {
            let post = by_id.get(pid.as_str()).ok_or_else(|| {
                Error::Alignment(format!("timeline {} references unknown post {pid}", rec.timeline_id))
            })?;
            tl_posts.push((*post).clone());
        }
        let tl = Timeline::new(rec.timeline_id, rec.user_id, rec.anchor, tl_posts)?;
        if !tl.post_ids().eq(rec.post_ids.iter().map(String::as_str)) {
            return Err(Error::Alignment(format!(
                "timeline {} lists its posts out of chronological order",
                tl.timeline_id
            )));
        }
        out.push(tl);
    }
    Ok(out)
}

pub fn read_timelines(path: &Path, posts: &[Post], strictness: Strictness) -> Result<Vec<Timeline>> {
    resolve_timelines(read_timeline_records(path, strictness)?, posts)
}

pub fn write_timelines(path: &Path, timelines: &[Timeline]) -> Result<()> {
    let records: Vec<TimelineRecord> = timelines.iter().map(TimelineRecord::from).collect();
    write_file(path, &records)
}

/// One externally computed post representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorRecord {
    pub timeline_id: String,
    pub post_id: String,
    pub vector: Vec<f64>,
    #[serde(flatten, default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub extra: ExtraFields,
}

impl Record for VectorRecord {
    fn extra(&self) -> &ExtraFields {
        &self.extra
    }
}

pub fn read_vectors(path: &Path, strictness: Strictness) -> Result<Vec<VectorRecord>> {
    read_file(path, strictness)
}

pub fn write_vectors(path: &Path, records: &[VectorRecord]) -> Result<()> {
    write_file(path, records)
}

/// Ids of timelines whose length falls outside the extractor's bounds.
pub fn nonstandard_length_ids(timelines: &[Timeline]) -> Vec<&str> {
    timelines
        .iter()
        .filter(|t| !t.has_standard_length())
        .map(|t| t.timeline_id.as_str())
        .collect()
}

pub fn read_labels(path: &Path, strictness: Strictness) -> Result<Vec<LabelSequence>> {
    let labels: Vec<LabelSequence> = read_file(path, strictness)?;
    let mut seen = HashMap::new();
    for l in &labels {
        if seen.insert(l.timeline_id.as_str(), ()).is_some() {
            return Err(Error::DuplicateRecord(format!("labels for {}", l.timeline_id)));
        }
    }
    Ok(labels)
}

pub fn write_labels(path: &Path, labels: &[LabelSequence]) -> Result<()> {
    write_file(path, labels)
}

/// Checks that every timeline has exactly one aligned label sequence and
/// returns the sequences in timeline order.
pub fn align_labels<'a>(labels: &'a [LabelSequence], timelines: &[Timeline]) -> Result<Vec<&'a LabelSequence>> {
    let by_id: BTreeMap<&str, &LabelSequence> = labels.iter().map(|l| (l.timeline_id.as_str(), l)).collect();
    if by_id.len() != timelines.len() {
        return Err(Error::Alignment(format!(
            "{} label sequences for {} timelines",
            by_id.len(),
            timelines.len()
        )));
    }
    timelines
        .iter()
        .map(|t| {
            let seq = by_id
                .get(t.timeline_id.as_str())
                .ok_or_else(|| Error::Alignment(format!("no labels for timeline {}", t.timeline_id)))?;
            seq.check_aligned(t)?;
            Ok(*seq)
        })
        .collect()
}

pub fn read_annotations(path: &Path, strictness: Strictness) -> Result<Vec<AnnotationRecord>> {
    read_file(path, strictness)
}

pub fn write_annotations(path: &Path, records: &[AnnotationRecord]) -> Result<()> {
    write_file(path, records)
}

/// Writes a pretty-printed JSON document followed by a newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_reader(open(path)?).map_err(|e| Error::parse(e.line(), e.to_string()))
}
