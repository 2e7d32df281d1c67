//! Candidate timelines around posting-frequency change points.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::changepoint::{detect, ChangePoint, CountSeries, DetectorConfig};
use crate::error::{Error, Result};
use crate::types::{Post, Timeline, MAX_TIMELINE_POSTS, MIN_TIMELINE_POSTS};

/// One zero-filled daily series per user, ordered by user id.
pub fn daily_counts(posts: &[Post]) -> Vec<CountSeries> {
    let mut by_user: BTreeMap<&str, BTreeMap<NaiveDate, u32>> = BTreeMap::new();
    for p in posts {
        *by_user
            .entry(p.user_id.as_str())
            .or_default()
            .entry(p.date())
            .or_default() += 1;
    }
    by_user
        .into_iter()
        .filter_map(|(user, days)| {
            let (&first, _) = days.first_key_value()?;
            let (&last, _) = days.last_key_value()?;
            let span = (last - first).num_days() as usize + 1;
            let mut counts = vec![0u32; span];
            for (d, c) in days {
                counts[(d - first).num_days() as usize] = c;
            }
            Some(CountSeries {
                user_id: user.to_owned(),
                start_date: first,
                counts,
            })
        })
        .collect()
}

/// Runs change-point detection for every user in parallel.
pub fn detect_all(series: &[CountSeries], config: &DetectorConfig) -> Result<BTreeMap<String, Vec<ChangePoint>>> {
    series
        .par_iter()
        .map(|s| Ok((s.user_id.clone(), detect(s, config)?)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    /// Posts within this many calendar days of the anchor are included.
    pub window_days: u32,
    pub min_posts: usize,
    pub max_posts: usize,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            window_days: 7,
            min_posts: MIN_TIMELINE_POSTS,
            max_posts: MAX_TIMELINE_POSTS,
        }
    }
}

/// Count, mean, standard deviation and range of timeline lengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub timelines: usize,
    pub posts: usize,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub min: Option<usize>,
    pub max: Option<usize>,
}

impl LengthStats {
    pub fn of(timelines: &[Timeline]) -> Self {
        let lens: Vec<usize> = timelines.iter().map(Timeline::len).collect();
        let n = lens.len();
        let posts: usize = lens.iter().sum();
        let mean = (n > 0).then(|| posts as f64 / n as f64);
        let sd = mean.map(|m| {
            if n < 2 {
                0.0
            } else {
                let ss: f64 = lens.iter().map(|&l| (l as f64 - m).powi(2)).sum();
                (ss / (n - 1) as f64).sqrt()
            }
        });
        Self {
            timelines: n,
            posts,
            mean,
            sd,
            min: lens.iter().copied().min(),
            max: lens.iter().copied().max(),
        }
    }
}

/// Bookkeeping emitted alongside extracted timelines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionSummary {
    pub users: usize,
    pub change_points: usize,
    pub candidates: usize,
    pub dropped_short: usize,
    pub dropped_long: usize,
    pub sampled: usize,
    pub candidate_lengths: LengthStats,
    pub sampled_lengths: LengthStats,
}

pub fn timeline_id(user_id: &str, anchor: NaiveDate) -> String {
    format!("{user_id}_{}", anchor.format("%Y%m%d"))
}

/// Builds one timeline per change point from the user's posts whose UTC date
/// lies within `window_days` of the anchor date, keeping those whose length
/// is within `[min_posts, max_posts]`. Output is sorted by anchor, then user.
pub fn extract_timelines(
    posts: &[Post],
    changepoints: &BTreeMap<String, Vec<ChangePoint>>,
    config: &ExtractionConfig,
) -> Result<(Vec<Timeline>, ExtractionSummary)> {
    let mut by_user: BTreeMap<&str, Vec<&Post>> = BTreeMap::new();
    for p in posts {
        by_user.entry(p.user_id.as_str()).or_default().push(p);
    }
    let mut timelines = Vec::new();
    let (mut short, mut long, mut total_cps) = (0, 0, 0);
    for (user, cps) in changepoints {
        let user_posts = by_user.get(user.as_str()).map(Vec::as_slice).unwrap_or(&[]);
        for cp in cps {
            total_cps += 1;
            let window: Vec<Post> = user_posts
                .iter()
                .filter(|p| (p.date() - cp.date).num_days().unsigned_abs() <= config.window_days as u64)
                .map(|p| (*p).clone())
                .collect();
            if window.len() < config.min_posts {
                short += 1;
            } else if window.len() > config.max_posts {
                long += 1;
            } else {
                timelines.push(Timeline::new(
                    timeline_id(user, cp.date),
                    user.as_str(),
                    cp.date,
                    window,
                )?);
            }
        }
    }
    timelines.sort_by(|a, b| a.anchor.cmp(&b.anchor).then_with(|| a.user_id.cmp(&b.user_id)));
    let stats = LengthStats::of(&timelines);
    let summary = ExtractionSummary {
        users: by_user.len(),
        change_points: total_cps,
        candidates: timelines.len(),
        dropped_short: short,
        dropped_long: long,
        sampled: timelines.len(),
        candidate_lengths: stats,
        sampled_lengths: stats,
    };
    Ok((timelines, summary))
}

/// Draws `n` timelines uniformly at random. With `one_per_user`, users are
/// drawn first and then one of each chosen user's timelines. Output is sorted
/// by timeline id.
pub fn sample_timelines(candidates: &[Timeline], n: usize, one_per_user: bool, seed: u64) -> Result<Vec<Timeline>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<&Timeline> = if one_per_user {
        let mut by_user: BTreeMap<&str, Vec<&Timeline>> = BTreeMap::new();
        for t in candidates {
            by_user.entry(t.user_id.as_str()).or_default().push(t);
        }
        if by_user.len() < n {
            return Err(Error::InsufficientCandidates {
                needed: n,
                available: by_user.len(),
            });
        }
        let mut groups: Vec<Vec<&Timeline>> = by_user.into_values().collect();
        for g in &mut groups {
            g.sort_by(|a, b| a.timeline_id.cmp(&b.timeline_id));
        }
        groups.shuffle(&mut rng);
        groups
            .iter()
            .take(n)
            .map(|g| *g.choose(&mut rng).expect("groups are non-empty"))
            .collect()
    } else {
        if candidates.len() < n {
            return Err(Error::InsufficientCandidates {
                needed: n,
                available: candidates.len(),
            });
        }
        let mut all: Vec<&Timeline> = candidates.iter().collect();
        all.sort_by(|a, b| a.timeline_id.cmp(&b.timeline_id));
        all.shuffle(&mut rng);
        all.truncate(n);
        all
    };
    chosen.sort_by(|a, b| a.timeline_id.cmp(&b.timeline_id));
    Ok(chosen.into_iter().cloned().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{DateTime, Days, Utc};
    use std::collections::BTreeSet;

    fn day0() -> DateTime<Utc> {
        DateTime::from_timestamp(1_600_000_000, 0).unwrap()
    }

    fn post(user: &str, id: usize, day: i64, second: i64) -> Post {
        let ts = day0() + chrono::Duration::days(day) + chrono::Duration::seconds(second);
        Post::new(user, format!("{user}-{id}"), ts, "")
    }

    fn cp(date: NaiveDate) -> ChangePoint {
        ChangePoint {
            date,
            day_index: 0,
            posterior_mass: 1.0,
        }
    }

    #[test]
    fn same_day_posts_collapse() {
        let posts: Vec<Post> = (0..3).map(|i| post("u", i, 0, i as i64)).collect();
        let s = daily_counts(&posts);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].counts, vec![3]);
    }

    #[test]
    fn gaps_are_zero_filled() {
        let s = daily_counts(&[post("u", 0, 0, 0), post("u", 1, 2, 0)]);
        assert_eq!(s[0].counts, vec![1, 0, 1]);
        assert_eq!(s[0].start_date, day0().date_naive());
    }

    #[test]
    fn window_and_length_bounds() {
        let anchor = day0().date_naive() + Days::new(10);
        let cps: BTreeMap<String, Vec<ChangePoint>> = [
            ("a".to_owned(), vec![cp(anchor)]),
            ("b".to_owned(), vec![cp(anchor)]),
            ("c".to_owned(), vec![cp(anchor)]),
        ]
        .into();
        let mut posts = Vec::new();
        // a: 10 posts on days 3..=17 plus two outside the window.
        for i in 0..10 {
            posts.push(post("a", i, 3 + (i as i64 * 14) / 9, 0));
        }
        posts.push(post("a", 98, 2, 0));
        posts.push(post("a", 99, 18, 0));
        // b: 9 posts inside.
        for i in 0..9 {
            posts.push(post("b", i, 10, i as i64));
        }
        // c: 151 posts inside.
        for i in 0..151 {
            posts.push(post("c", i, 10, i as i64));
        }
        let (tls, summary) = extract_timelines(&posts, &cps, &ExtractionConfig::default()).unwrap();
        assert_eq!(tls.len(), 1);
        assert_eq!(tls[0].user_id, "a");
        assert_eq!(tls[0].len(), 10);
        assert_eq!(summary.dropped_short, 1);
        assert_eq!(summary.dropped_long, 1);
        assert!(tls[0].posts.iter().all(|p| (p.date() - anchor).num_days().abs() <= 7));
    }

    fn candidates(users: usize, per_user: usize) -> Vec<Timeline> {
        let mut out = Vec::new();
        for u in 0..users {
            for k in 0..per_user {
                let user = format!("u{u:03}");
                let anchor = day0().date_naive() + Days::new(20 * k as u64);
                let posts = vec![post(&user, k, 20 * k as i64, 0)];
                out.push(Timeline::new(timeline_id(&user, anchor), user, anchor, posts).unwrap());
            }
        }
        out
    }

    #[test]
    fn sample_one_per_user() {
        let c = candidates(600, 2);
        let s = sample_timelines(&c, 500, true, 11).unwrap();
        assert_eq!(s.len(), 500);
        let users: BTreeSet<&str> = s.iter().map(|t| t.user_id.as_str()).collect();
        assert_eq!(users.len(), 500);
        assert_eq!(s, sample_timelines(&c, 500, true, 11).unwrap());
        assert!(sample_timelines(&c, 0, true, 11).unwrap().is_empty());
    }

    #[test]
    fn sample_needs_enough_users() {
        let c = candidates(3, 4);
        assert!(matches!(
            sample_timelines(&c, 4, true, 0),
            Err(Error::InsufficientCandidates {
                needed: 4,
                available: 3
            })
        ));
        assert_eq!(sample_timelines(&c, 4, false, 0).unwrap().len(), 4);
    }

    #[test]
    fn length_stats() {
        let s = LengthStats::of(&[]);
        assert_eq!(s.mean, None);
        let c = candidates(2, 1);
        let s = LengthStats::of(&c);
        assert_eq!(
            (s.timelines, s.posts, s.mean, s.sd, s.min, s.max),
            (2, 2, Some(1.0), Some(0.0), Some(1), Some(1))
        );
    }
}
