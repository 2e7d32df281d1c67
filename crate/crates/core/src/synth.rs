//! Synthetic corpora with planted posting-rate changes and planted
//! Switch/Escalation structure.
//!
//! Post text is drawn from small positive, negative and neutral word lists
//! according to a latent mood path. It is not natural language and scores on
//! it say nothing about real data.

use std::collections::BTreeMap;

use chrono::{DateTime, Days, Duration, NaiveDate, Utc};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotation::AnnotationRecord;
use crate::changepoint::DetectorConfig;
use crate::error::{Error, Result};
use crate::extraction::{daily_counts, detect_all, extract_timelines, ExtractionConfig, ExtractionSummary};
use crate::models::{ClassPriors, SparseVector};
use crate::seeding::derive_seed;
use crate::types::{extract_regions, ExtraFields, Label, LabelSequence, Post, Role, Timeline};

const POSITIVE: [&str; 30] = [
    "happy",
    "glad",
    "hopeful",
    "calm",
    "grateful",
    "proud",
    "excited",
    "relieved",
    "loved",
    "bright",
    "cheerful",
    "peaceful",
    "strong",
    "confident",
    "joyful",
    "content",
    "thankful",
    "optimistic",
    "energized",
    "blessed",
    "safe",
    "warm",
    "free",
    "motivated",
    "smiling",
    "lucky",
    "rested",
    "better",
    "good",
    "great",
];

const NEGATIVE: [&str; 30] = [
    "sad",
    "hopeless",
    "anxious",
    "tired",
    "lonely",
    "empty",
    "worthless",
    "scared",
    "angry",
    "broken",
    "numb",
    "miserable",
    "exhausted",
    "lost",
    "afraid",
    "ashamed",
    "hurt",
    "drained",
    "awful",
    "terrible",
    "panicked",
    "guilty",
    "trapped",
    "crying",
    "worse",
    "alone",
    "useless",
    "desperate",
    "stressed",
    "heavy",
];

const NEUTRAL: [&str; 30] = [
    "today", "work", "the", "a", "went", "home", "then", "we", "and", "it", "was", "with", "after", "lunch", "weather",
    "bus", "class", "phone", "friend", "week", "morning", "evening", "talked", "about", "some", "time", "just",
    "really", "maybe", "again",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_users: usize,
    pub days: usize,
    pub start_date: NaiveDate,
    /// First day (0-based) posted at `changed_rate`.
    pub change_day: usize,
    pub base_rate: f64,
    pub changed_rate: f64,
    /// Target post-level label frequencies.
    pub priors: ClassPriors,
    /// Inclusive bounds on planted region lengths.
    pub escalation_len: (usize, usize),
    pub switch_len: (usize, usize),
    /// Words used from each of the positive, negative and neutral lists.
    pub lexicon_size: usize,
    pub words_per_post: (usize, usize),
    /// One label-flip rate per simulated annotator.
    pub annotator_noise: Vec<f64>,
    pub detector: DetectorConfig,
    pub extraction: ExtractionConfig,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_users: 500,
            days: 60,
            start_date: NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid date"),
            change_day: 30,
            base_rate: 1.0,
            changed_rate: 8.0,
            priors: ClassPriors {
                o: 0.845,
                is: 0.047,
                ie: 0.108,
            },
            escalation_len: (2, 8),
            switch_len: (1, 3),
            lexicon_size: 30,
            words_per_post: (6, 12),
            annotator_noise: vec![0.05, 0.08, 0.12],
            detector: DetectorConfig::default(),
            extraction: ExtractionConfig::default(),
            seed: 0,
        }
    }
}

fn mean_len((lo, hi): (usize, usize)) -> f64 {
    (lo + hi) as f64 / 2.0
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_users == 0 || self.days == 0 {
            return bad("need at least one user and one day".into());
        }
        if self.change_day == 0 || self.change_day >= self.days {
            return bad(format!("change day {} outside 1..{}", self.change_day, self.days));
        }
        if !(self.base_rate > 0.0
            && self.base_rate.is_finite()
            && self.changed_rate > 0.0
            && self.changed_rate.is_finite())
        {
            return bad("posting rates must be positive".into());
        }
        self.priors.validate().map_err(|e| Error::Config(e.to_string()))?;
        for (name, (lo, hi)) in [("escalation", self.escalation_len), ("switch", self.switch_len)] {
            if lo == 0 || lo > hi {
                return bad(format!("{name} length bounds {lo}..={hi}"));
            }
        }
        if self.lexicon_size == 0 || self.lexicon_size > POSITIVE.len() {
            return bad(format!("lexicon size must be in 1..={}", POSITIVE.len()));
        }
        if self.words_per_post.0 == 0 || self.words_per_post.0 > self.words_per_post.1 {
            return bad("words per post bounds".into());
        }
        if self.annotator_noise.len() < 2 || self.annotator_noise.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return bad("need at least two annotators with noise rates in [0, 1]".into());
        }
        self.detector.rule.validate()?;
        self.region_start_probs().map(|_| ())
    }

    /// After every `O` post a region starts with these probabilities, which
    /// makes the long-run label frequencies equal the priors.
    fn region_start_probs(&self) -> Result<(f64, f64)> {
        let p = &self.priors;
        if p.o <= 0.0 {
            return Err(Error::Config("the O prior must be positive".into()));
        }
        let q_e = p.ie / (p.o * mean_len(self.escalation_len));
        let q_s = p.is / (p.o * mean_len(self.switch_len));
        if q_e + q_s > 1.0 {
            return Err(Error::Config(format!(
                "priors need region start probabilities {q_e:.3} + {q_s:.3} > 1 with these region lengths"
            )));
        }
        Ok((q_e, q_s))
    }
}

/// The day a user's posting rate was switched.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedChange {
    pub user_id: String,
    pub change_date: NaiveDate,
}

/// Everything the generator produces. `gold` holds the planted labels of the
/// timelines the default detector and extractor find in `posts`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub posts: Vec<Post>,
    pub timelines: Vec<Timeline>,
    pub gold: Vec<LabelSequence>,
    pub annotations: Vec<AnnotationRecord>,
    pub planted: Vec<PlantedChange>,
    pub summary: ExtractionSummary,
}

/// Labels of a stream of `n` posts from a renewal process: after each `O`,
/// an escalation or switch region may start; every region is followed by at
/// least one `O`. The stream starts at a random phase.
fn label_stream(n: usize, cfg: &SynthConfig, rng: &mut impl Rng) -> Result<Vec<Label>> {
    let (q_e, q_s) = cfg.region_start_probs()?;
    let burn_in = rng.random_range(0..=40);
    let mut out = Vec::with_capacity(n + burn_in + cfg.escalation_len.1);
    while out.len() < n + burn_in {
        out.push(Label::O);
        let u: f64 = rng.random();
        let (label, (lo, hi)) = if u < q_e {
            (Label::IE, cfg.escalation_len)
        } else if u < q_e + q_s {
            (Label::IS, cfg.switch_len)
        } else {
            continue;
        };
        let len = rng.random_range(lo..=hi);
        out.extend(std::iter::repeat_n(label, len));
    }
    out.drain(..burn_in);
    out.truncate(n);
    Ok(out)
}

/// Mood in `[-1, 1]` per post: `O` posts sit near the user's baseline, a
/// switch flips its sign, an escalation ramps monotonically from the
/// baseline to an extreme reached on the region's last post.
fn mood_path(labels: &[Label], rng: &mut impl Rng) -> Vec<f64> {
    let sign: f64 = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let baseline: f64 = sign * rng.random_range(0.2..0.5);
    let jitter = Normal::new(0.0, 0.1).expect("valid sd");
    let mut mood = vec![0.0; labels.len()];
    for region in extract_regions(labels).unwrap_or_default() {
        match region.label {
            Label::O => {
                for m in &mut mood[region.start..=region.end] {
                    *m = (baseline + jitter.sample(rng)).clamp(-1.0, 1.0);
                }
            }
            Label::IS => {
                let level = -sign * rng.random_range(0.6..0.9);
                for m in &mut mood[region.start..=region.end] {
                    *m = level;
                }
            }
            Label::IE => {
                let peak = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let len = region.len() as f64;
                for (j, m) in mood[region.start..=region.end].iter_mut().enumerate() {
                    *m = baseline + (peak - baseline) * (j + 1) as f64 / len;
                }
            }
        }
    }
    mood
}

fn post_text(mood: f64, cfg: &SynthConfig, rng: &mut impl Rng) -> String {
    let k = cfg.lexicon_size;
    let n = rng.random_range(cfg.words_per_post.0..=cfg.words_per_post.1);
    let mood = mood.clamp(-1.0, 1.0);
    let sentiment = 0.15 + 0.7 * mood.abs();
    let positive = (1.0 + mood) / 2.0;
    let words: Vec<&str> = (0..n)
        .map(|_| {
            let list: &[&str] = if rng.random_bool(sentiment) {
                if rng.random_bool(positive) {
                    &POSITIVE[..k]
                } else {
                    &NEGATIVE[..k]
                }
            } else {
                &NEUTRAL[..k]
            };
            *list.choose(rng).expect("lexicon is non-empty")
        })
        .collect();
    words.join(" ")
}

struct UserData {
    posts: Vec<Post>,
    labels: Vec<Label>,
}

fn generate_user(user_id: &str, cfg: &SynthConfig) -> Result<UserData> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, user_id));
    let before = Poisson::new(cfg.base_rate).map_err(|e| Error::Config(e.to_string()))?;
    let after = Poisson::new(cfg.changed_rate).map_err(|e| Error::Config(e.to_string()))?;
    let start: DateTime<Utc> = cfg.start_date.and_hms_opt(0, 0, 0).expect("midnight").and_utc();
    let mut stamps = Vec::new();
    for day in 0..cfg.days {
        let rate = if day < cfg.change_day { &before } else { &after };
        let count = rate.sample(&mut rng) as usize;
        let mut secs: Vec<i64> = (0..count).map(|_| rng.random_range(0..86_400)).collect();
        secs.sort_unstable();
        stamps.extend(
            secs.into_iter()
                .map(|s| start + Duration::days(day as i64) + Duration::seconds(s)),
        );
    }
    let labels = label_stream(stamps.len(), cfg, &mut rng)?;
    let mood = mood_path(&labels, &mut rng);
    let posts = stamps
        .into_iter()
        .zip(&mood)
        .enumerate()
        .map(|(i, (ts, &m))| Post::new(user_id, format!("{user_id}-{i:05}"), ts, post_text(m, cfg, &mut rng)))
        .collect();
    Ok(UserData { posts, labels })
}

/// Roles implied by a label sequence: a switch starts on its first post, an
/// escalation peaks on its last post.
pub fn planted_roles(labels: &[Label]) -> Vec<Role> {
    let mut roles = vec![Role::None; labels.len()];
    for r in extract_regions(labels).unwrap_or_default() {
        match r.label {
            Label::O => {}
            Label::IS => {
                roles[r.start..=r.end].fill(Role::InRegion);
                roles[r.start] = Role::SwitchStart;
            }
            Label::IE => {
                roles[r.start..=r.end].fill(Role::InRegion);
                roles[r.end] = Role::EscalationPeak;
            }
        }
    }
    roles
}

fn flip(label: Label, rng: &mut impl Rng) -> Label {
    let others: Vec<Label> = Label::ALL.into_iter().filter(|&l| l != label).collect();
    *others.choose(rng).expect("two other labels")
}

fn annotate(gold: &LabelSequence, timeline: &Timeline, cfg: &SynthConfig) -> Vec<AnnotationRecord> {
    let roles = gold.roles.clone().unwrap_or_else(|| planted_roles(&gold.labels));
    let mut out = Vec::with_capacity(timeline.len() * cfg.annotator_noise.len());
    for (a, &noise) in cfg.annotator_noise.iter().enumerate() {
        let annotator = format!("a{}", a + 1);
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &format!("{}/{annotator}", timeline.timeline_id)));
        for ((post, &label), &role) in timeline.posts.iter().zip(&gold.labels).zip(&roles) {
            let (label, role) = if rng.random_bool(noise) {
                let l = flip(label, &mut rng);
                (l, if l == Label::O { Role::None } else { Role::InRegion })
            } else {
                (label, role)
            };
            out.push(AnnotationRecord {
                timeline_id: timeline.timeline_id.clone(),
                post_id: post.post_id.clone(),
                annotator_id: annotator.clone(),
                label,
                role,
                extra: ExtraFields::new(),
            });
        }
    }
    out
}

pub fn user_id(i: usize) -> String {
    format!("u{i:05}")
}

/// Generates posts for every user, runs detection and extraction on them,
/// and labels and annotates the resulting timelines.
pub fn generate(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let users: Vec<String> = (0..cfg.n_users).map(user_id).collect();
    let data: Vec<UserData> = users.par_iter().map(|u| generate_user(u, cfg)).collect::<Result<_>>()?;

    let mut label_of: BTreeMap<&str, Label> = BTreeMap::new();
    for d in &data {
        for (p, &l) in d.posts.iter().zip(&d.labels) {
            label_of.insert(p.post_id.as_str(), l);
        }
    }
    let posts: Vec<Post> = data.iter().flat_map(|d| d.posts.iter().cloned()).collect();
    let series = daily_counts(&posts);
    let cps = detect_all(&series, &cfg.detector)?;
    let (timelines, summary) = extract_timelines(&posts, &cps, &cfg.extraction)?;

    let gold: Vec<LabelSequence> = timelines
        .iter()
        .map(|t| {
            let labels: Vec<Label> = t.post_ids().map(|id| label_of[id]).collect();
            let mut seq = LabelSequence::new(t.timeline_id.clone(), labels);
            seq.roles = Some(planted_roles(&seq.labels));
            seq
        })
        .collect();
    let annotations = timelines
        .par_iter()
        .zip(&gold)
        .flat_map_iter(|(t, g)| annotate(g, t, cfg))
        .collect();
    let change_date = cfg.start_date + Days::new(cfg.change_day as u64);
    let planted = users
        .into_iter()
        .map(|user_id| PlantedChange { user_id, change_date })
        .collect();
    Ok(SynthCorpus {
        posts,
        timelines,
        gold,
        annotations,
        planted,
        summary,
    })
}

/// Daily post counts alone, for change-point experiments.
pub fn planted_counts(cfg: &SynthConfig, user: &str) -> Result<Vec<u32>> {
    cfg.validate()?;
    let data = generate_user(user, cfg)?;
    let mut counts = vec![0u32; cfg.days];
    for p in &data.posts {
        counts[(p.date() - cfg.start_date).num_days() as usize] += 1;
    }
    Ok(counts)
}

/// Feature-level corpus whose change labels are visible only relative to
/// neighbouring posts: each timeline has a large random offset shared by all
/// its posts, and a change post adds a small shift along one axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastConfig {
    pub timelines: usize,
    pub posts_per_timeline: usize,
    pub dim: usize,
    pub offset_sd: f64,
    pub signal: f64,
    pub noise_sd: f64,
    pub priors: ClassPriors,
    pub escalation_len: (usize, usize),
    pub switch_len: (usize, usize),
}

impl Default for ContrastConfig {
    fn default() -> Self {
        Self {
            timelines: 200,
            posts_per_timeline: 30,
            dim: 4,
            offset_sd: 5.0,
            signal: 1.5,
            noise_sd: 0.3,
            priors: SynthConfig::default().priors,
            escalation_len: (2, 3),
            switch_len: (1, 2),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastSequence {
    pub rows: Vec<SparseVector>,
    pub labels: Vec<Label>,
}

pub fn neighbor_contrast_corpus(cfg: &ContrastConfig, seed: u64) -> Result<Vec<ContrastSequence>> {
    if cfg.dim < 2 || cfg.posts_per_timeline == 0 {
        return Err(Error::Config(
            "contrast corpus needs dim >= 2 and non-empty timelines".into(),
        ));
    }
    let stream_cfg = SynthConfig {
        priors: cfg.priors,
        escalation_len: cfg.escalation_len,
        switch_len: cfg.switch_len,
        ..SynthConfig::default()
    };
    stream_cfg.region_start_probs()?;
    let offset = Normal::new(0.0, cfg.offset_sd).map_err(|e| Error::Config(e.to_string()))?;
    let noise = Normal::new(0.0, cfg.noise_sd).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..cfg.timelines)
        .map(|_| {
            let labels = label_stream(cfg.posts_per_timeline, &stream_cfg, &mut rng)?;
            let u: Vec<f64> = (0..cfg.dim).map(|_| offset.sample(&mut rng)).collect();
            let rows = labels
                .iter()
                .map(|l| {
                    let mut x: Vec<f64> = u.iter().map(|o| o + noise.sample(&mut rng)).collect();
                    match l {
                        Label::IS => x[0] += cfg.signal,
                        Label::IE => x[1] += cfg.signal,
                        Label::O => {}
                    }
                    SparseVector::from_dense(&x)
                })
                .collect();
            Ok(ContrastSequence { rows, labels })
        })
        .collect()
}
