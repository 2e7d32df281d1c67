use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{
    coverage, coverage_macro, label_in_play, label_macro, pair_sequences, post_level, recall_by_region_length,
    windowed, windowed_macro, BucketRecall, ClassScores, CoverageScore, LabelTable, LengthBuckets, SequencePair,
    WindowedScore,
};
use crate::error::{Error, Result};
use crate::types::{Label, LabelSequence};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthAnalysis {
    pub label: Label,
    pub buckets: LengthBuckets,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationConfig {
    pub windows: Vec<usize>,
    /// Labels scored by the windowed and coverage metrics.
    pub labels: Vec<Label>,
    pub per_timeline: bool,
    pub length_analysis: Option<LengthAnalysis>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            windows: vec![0, 1, 2, 3],
            labels: Label::ALL.to_vec(),
            per_timeline: false,
            length_analysis: Some(LengthAnalysis {
                label: Label::IE,
                buckets: LengthBuckets::Exact,
            }),
        }
    }
}

/// Windowed and coverage scores of a single timeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineDetail {
    pub timeline_id: String,
    pub windowed: BTreeMap<String, BTreeMap<Label, WindowedScore>>,
    pub coverage: BTreeMap<Label, CoverageScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallByLength {
    pub label: Label,
    pub buckets: Vec<BucketRecall>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub timelines: usize,
    pub posts: usize,
    pub post_level: LabelTable<ClassScores>,
    /// Keyed `"w=<n>"`.
    pub windowed: BTreeMap<String, LabelTable<WindowedScore>>,
    pub coverage: LabelTable<CoverageScore>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recall_by_length: Option<RecallByLength>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_timeline: Option<Vec<TimelineDetail>>,
}

pub(crate) fn window_key(w: usize) -> String {
    format!("w={w}")
}

/// Runs every metric over aligned gold and predicted sequences.
pub fn evaluate(gold: &[LabelSequence], pred: &[LabelSequence], config: &EvaluationConfig) -> Result<MetricsReport> {
    if config.labels.is_empty() {
        return Err(Error::InvalidParameter("no labels selected for evaluation".into()));
    }
    let mut labels = config.labels.clone();
    labels.sort();
    labels.dedup();
    let mut windows = config.windows.clone();
    windows.sort_unstable();
    windows.dedup();

    let pairs = pair_sequences(gold, pred)?;
    let in_play: BTreeMap<Label, bool> = labels.iter().map(|&l| (l, label_in_play(&pairs, l))).collect();

    let mut windowed_tables = BTreeMap::new();
    for &w in &windows {
        let mut per_label = BTreeMap::new();
        for &l in &labels {
            per_label.insert(l, windowed_macro(&pairs, l, w)?);
        }
        let macro_avg = WindowedScore {
            precision: label_macro(per_label.iter().map(|(l, s)| (in_play[l], s.precision))),
            recall: label_macro(per_label.iter().map(|(l, s)| (in_play[l], s.recall))),
        };
        windowed_tables.insert(window_key(w), LabelTable { per_label, macro_avg });
    }

    let mut cov = BTreeMap::new();
    for &l in &labels {
        cov.insert(l, coverage_macro(&pairs, l)?);
    }
    let cov_macro = CoverageScore {
        c_p: label_macro(cov.iter().map(|(l, s)| (in_play[l], s.c_p))),
        c_r: label_macro(cov.iter().map(|(l, s)| (in_play[l], s.c_r))),
    };

    let recall_by_length = config
        .length_analysis
        .as_ref()
        .map(|a| {
            Ok::<_, Error>(RecallByLength {
                label: a.label,
                buckets: recall_by_region_length(&pairs, a.label, &a.buckets)?,
            })
        })
        .transpose()?;

    let per_timeline = if config.per_timeline {
        Some(
            pairs
                .iter()
                .map(|p| timeline_detail(p, &labels, &windows))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };

    Ok(MetricsReport {
        timelines: pairs.len(),
        posts: pairs.iter().map(|p| p.gold.len()).sum(),
        post_level: post_level(&pairs),
        windowed: windowed_tables,
        coverage: LabelTable {
            per_label: cov,
            macro_avg: cov_macro,
        },
        recall_by_length,
        per_timeline,
    })
}

fn timeline_detail(pair: &SequencePair<'_>, labels: &[Label], windows: &[usize]) -> Result<TimelineDetail> {
    let mut win = BTreeMap::new();
    for &w in windows {
        let mut per_label = BTreeMap::new();
        for &l in labels {
            per_label.insert(l, windowed(pair.gold, pair.pred, l, w)?);
        }
        win.insert(window_key(w), per_label);
    }
    let mut cov = BTreeMap::new();
    for &l in labels {
        cov.insert(l, coverage(pair.gold, pair.pred, l)?);
    }
    Ok(TimelineDetail {
        timeline_id: pair.timeline_id.to_owned(),
        windowed: win,
        coverage: cov,
    })
}

/// Three decimals without the leading zero; `--` when undefined.
fn cell(v: Option<f64>) -> String {
    match v {
        None => "--".to_owned(),
        Some(x) => {
            let s = format!("{x:.3}");
            s.strip_prefix("0").map(str::to_owned).unwrap_or(s)
        }
    }
}

/// Renders a report as fixed-width text: post-level P/R/F1 per label and
/// macro, then coverage, then the windowed metrics per window.
pub fn render_table(report: &MetricsReport) -> String {
    let mut out = String::new();
    let pl_cols: Vec<(String, Option<&ClassScores>)> = Label::ALL
        .iter()
        .map(|l| (l.to_string(), report.post_level.per_label.get(l)))
        .chain(std::iter::once((
            "macro".to_owned(),
            Some(&report.post_level.macro_avg),
        )))
        .collect();
    let cov_cols: Vec<(String, Option<&CoverageScore>)> = Label::ALL
        .iter()
        .map(|l| (l.to_string(), report.coverage.per_label.get(l)))
        .chain(std::iter::once(("macro".to_owned(), Some(&report.coverage.macro_avg))))
        .collect();

    let _ = writeln!(out, "timelines: {}  posts: {}", report.timelines, report.posts);
    let _ = writeln!(out);
    let mut head1 = String::from("Post-level     ");
    let mut head2 = String::from("               ");
    let mut row = String::from("               ");
    for (name, scores) in &pl_cols {
        let _ = write!(head1, "| {name:<20}");
        let _ = write!(head2, "| {:>6}{:>7}{:>7}", "P", "R", "F1");
        let (p, r, f) = scores.map_or((None, None, None), |s| (s.precision, s.recall, s.f1));
        let _ = write!(row, "| {:>6}{:>7}{:>7}", cell(p), cell(r), cell(f));
    }
    let _ = writeln!(out, "{head1}\n{head2}\n{row}\n");

    let mut head1 = String::from("Coverage       ");
    let mut head2 = String::from("               ");
    let mut row = String::from("               ");
    for (name, scores) in &cov_cols {
        let _ = write!(head1, "| {name:<13}");
        let _ = write!(head2, "| {:>6}{:>7}", "C_p", "C_r");
        let (p, r) = scores.map_or((None, None), |s| (s.c_p, s.c_r));
        let _ = write!(row, "| {:>6}{:>7}", cell(p), cell(r));
    }
    let _ = writeln!(out, "{head1}\n{head2}\n{row}\n");

    let mut windows: Vec<(&String, &LabelTable<WindowedScore>)> = report.windowed.iter().collect();
    windows.sort_by_key(|(k, _)| k.trim_start_matches("w=").parse::<usize>().unwrap_or(usize::MAX));
    if let Some((_, first)) = windows.first() {
        let labels: Vec<Label> = Label::ALL
            .into_iter()
            .filter(|l| first.per_label.contains_key(l))
            .collect();
        let names: Vec<String> = labels
            .iter()
            .map(Label::to_string)
            .chain(std::iter::once("macro".to_owned()))
            .collect();
        let mut head1 = String::from("Windowed       ");
        let mut head2 = String::from("               ");
        for name in &names {
            let _ = write!(head1, "| {name:<13}");
            let _ = write!(head2, "| {:>6}{:>7}", "P_w", "R_w");
        }
        let _ = writeln!(out, "{head1}\n{head2}");
        for (key, table) in windows {
            let mut row = format!("{key:<15}");
            let scores = labels.iter().filter_map(|l| table.per_label.get(l));
            for s in scores.chain(std::iter::once(&table.macro_avg)) {
                let _ = write!(row, "| {:>6}{:>7}", cell(s.precision), cell(s.recall));
            }
            let _ = writeln!(out, "{row}");
        }
    }

    if let Some(rbl) = &report.recall_by_length {
        let _ = writeln!(out, "\nRecall of {} by gold region length", rbl.label);
        for b in &rbl.buckets {
            let _ = writeln!(
                out,
                "  {:>6}  regions {:>5}  posts {:>6}  recall {}",
                b.bucket,
                b.regions,
                b.posts,
                cell(b.recall)
            );
        }
    }
    out
}
