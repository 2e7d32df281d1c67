use std::fs;
use std::path::Path;

use moc_core::annotation::{aggregate, agreement_table, AnnotationSet};
use moc_core::changepoint::{DeclarationRule, DetectorConfig, GammaParams};
use moc_core::extraction::{
    daily_counts, detect_all, extract_timelines, sample_timelines, ExtractionConfig, LengthStats,
};
use moc_core::io::{self, Strictness};
use moc_core::metrics::{evaluate, render_table, EvaluationConfig, LengthAnalysis, LengthBuckets, MetricsReport};
use moc_core::models::{
    cross_validate, majority_baseline, ExternalVectors, FsdMode, LossChoice, PipelineConfig, TrainConfig,
};
use moc_core::synth::{generate, SynthConfig};
use moc_core::{Error, Label, Result, Timeline};

use super::{
    AggregateArgs, BaselineArgs, Cli, Command, EvaluateArgs, ExtractArgs, FsdModeArg, IaaArgs, MetaLoss, ReportArgs,
    SynthArgs,
};

pub fn run(cli: Cli) -> Result<()> {
    let strictness = if cli.strict {
        Strictness::Strict
    } else {
        Strictness::Lenient
    };
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Extract(a) => extract(a, strictness),
        Command::Aggregate(a) => aggregate_cmd(a, strictness),
        Command::Iaa(a) => iaa(a, strictness),
        Command::Evaluate(a) => evaluate_cmd(a, strictness),
        Command::Baseline(a) => baseline(a, strictness),
        Command::Report(a) => report(a),
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        n_users: a.users,
        days: a.days,
        change_day: a.change_day,
        base_rate: a.base_rate,
        changed_rate: a.changed_rate,
        annotator_noise: a.noise,
        seed: a.seed,
        ..SynthConfig::default()
    };
    let corpus = generate(&cfg)?;
    fs::create_dir_all(&a.out_dir).map_err(|e| Error::Io {
        path: a.out_dir.clone(),
        source: e,
    })?;
    let dir = &a.out_dir;
    io::write_posts(&dir.join("posts.jsonl"), &corpus.posts)?;
    io::write_timelines(&dir.join("timelines.jsonl"), &corpus.timelines)?;
    io::write_labels(&dir.join("gold.jsonl"), &corpus.gold)?;
    io::write_annotations(&dir.join("annotations.jsonl"), &corpus.annotations)?;
    io::write_json(&dir.join("planted.json"), &corpus.planted)?;
    io::write_json(&dir.join("summary.json"), &corpus.summary)?;
    eprintln!(
        "{} users, {} posts, {} timelines, {} annotations -> {}",
        cfg.n_users,
        corpus.posts.len(),
        corpus.timelines.len(),
        corpus.annotations.len(),
        dir.display()
    );
    Ok(())
}

fn extract(a: ExtractArgs, strictness: Strictness) -> Result<()> {
    let detector = DetectorConfig {
        prior: GammaParams::new(a.alpha, a.beta)?,
        hazard: a.hazard,
        rule: DeclarationRule {
            r_reset: a.r_reset,
            mass_threshold: a.mass_threshold,
            min_gap_days: a.min_gap_days,
        },
    };
    let extraction = ExtractionConfig {
        window_days: a.window_days,
        min_posts: a.min_posts,
        max_posts: a.max_posts,
    };
    if extraction.min_posts > extraction.max_posts {
        return Err(Error::InvalidParameter(format!(
            "--min-posts {} exceeds --max-posts {}",
            extraction.min_posts, extraction.max_posts
        )));
    }
    let posts = io::read_posts(&a.posts, strictness)?;
    let series = daily_counts(&posts);
    let cps = detect_all(&series, &detector)?;
    let (mut timelines, mut summary) = extract_timelines(&posts, &cps, &extraction)?;
    if let Some(n) = a.sample {
        timelines = sample_timelines(&timelines, n, a.one_per_user, a.seed)?;
        summary.sampled = timelines.len();
        summary.sampled_lengths = LengthStats::of(&timelines);
    }
    io::write_timelines(&a.out, &timelines)?;
    if let Some(path) = &a.summary {
        io::write_json(path, &summary)?;
    }
    if let Some(path) = &a.changepoints {
        io::write_json(path, &cps)?;
    }
    eprintln!(
        "{} users, {} change points, {} candidates ({} too short, {} too long), {} written",
        summary.users,
        summary.change_points,
        summary.candidates,
        summary.dropped_short,
        summary.dropped_long,
        summary.sampled
    );
    Ok(())
}

fn load_timelines(timelines: &Path, posts: &Path, strictness: Strictness) -> Result<Vec<Timeline>> {
    let posts = io::read_posts(posts, strictness)?;
    let timelines = io::read_timelines(timelines, &posts, strictness)?;
    let odd = io::nonstandard_length_ids(&timelines);
    if !odd.is_empty() {
        log::warn!("{} timelines fall outside the usual 10-150 posts", odd.len());
    }
    Ok(timelines)
}

fn aggregate_cmd(a: AggregateArgs, strictness: Strictness) -> Result<()> {
    let timelines = load_timelines(&a.timelines, &a.posts, strictness)?;
    let ann = AnnotationSet::from_records(io::read_annotations(&a.annotations, strictness)?)?;
    let gold = aggregate(&ann, &timelines)?;
    io::write_labels(&a.out, &gold)?;
    eprintln!("{} gold sequences from {} annotations", gold.len(), ann.len());
    Ok(())
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "--".to_owned(), |x| format!("{x:.3}"))
}

fn iaa(a: IaaArgs, strictness: Strictness) -> Result<()> {
    let ann = AnnotationSet::from_records(io::read_annotations(&a.annotations, strictness)?)?;
    let table = agreement_table(&ann)?;
    println!("{:<6}{:>10}{:>10}", "label", "perfect", "majority");
    for l in Label::ALL {
        let row = &table[l.as_str()];
        println!("{:<6}{:>10}{:>10}", l, cell(row.perfect), cell(row.majority));
    }
    if let Some(path) = &a.out {
        io::write_json(path, &table)?;
    }
    Ok(())
}

fn parse_buckets(s: &str) -> Result<LengthBuckets> {
    if s.trim().eq_ignore_ascii_case("exact") {
        return Ok(LengthBuckets::Exact);
    }
    let edges = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::InvalidParameter(format!("--length-buckets {s:?}: {e}")))?;
    if edges.is_empty() || edges.windows(2).any(|w| w[0] >= w[1]) || edges[0] == 0 {
        return Err(Error::InvalidParameter(format!(
            "--length-buckets needs ascending positive bounds, got {s:?}"
        )));
    }
    Ok(LengthBuckets::Edges(edges))
}

fn evaluate_cmd(a: EvaluateArgs, strictness: Strictness) -> Result<()> {
    let cfg = EvaluationConfig {
        windows: a.windows,
        labels: a.labels,
        per_timeline: a.per_timeline,
        length_analysis: Some(LengthAnalysis {
            label: a.length_label.into(),
            buckets: parse_buckets(&a.length_buckets)?,
        }),
    };
    let gold = io::read_labels(&a.gold, strictness)?;
    let pred = io::read_labels(&a.pred, strictness)?;
    let report = evaluate(&gold, &pred, &cfg)?;
    print!("{}", render_table(&report));
    if let Some(path) = &a.out {
        io::write_json(path, &report)?;
    }
    if let Some(path) = &a.csv {
        write_csv(path, &report)?;
    }
    Ok(())
}

fn write_csv(path: &Path, report: &MetricsReport) -> Result<()> {
    let wrap = |e: csv::Error| Error::Io {
        path: path.to_owned(),
        source: std::io::Error::other(e),
    };
    let mut w = csv::Writer::from_path(path).map_err(wrap)?;
    w.write_record(["section", "window", "label", "statistic", "value"])
        .map_err(wrap)?;
    let mut row = |section: &str, window: &str, label: &str, stat: &str, v: Option<f64>| {
        let value = v.map(|x| x.to_string()).unwrap_or_default();
        w.write_record([section, window, label, stat, value.as_str()])
    };
    let pl = &report.post_level;
    for (label, s) in pl
        .per_label
        .iter()
        .map(|(l, s)| (l.as_str(), s))
        .chain([("macro", &pl.macro_avg)])
    {
        row("post_level", "", label, "precision", s.precision).map_err(wrap)?;
        row("post_level", "", label, "recall", s.recall).map_err(wrap)?;
        row("post_level", "", label, "f1", s.f1).map_err(wrap)?;
    }
    for (key, table) in &report.windowed {
        let window = key.trim_start_matches("w=");
        for (label, s) in table
            .per_label
            .iter()
            .map(|(l, s)| (l.as_str(), s))
            .chain([("macro", &table.macro_avg)])
        {
            row("windowed", window, label, "precision", s.precision).map_err(wrap)?;
            row("windowed", window, label, "recall", s.recall).map_err(wrap)?;
        }
    }
    let cov = &report.coverage;
    for (label, s) in cov
        .per_label
        .iter()
        .map(|(l, s)| (l.as_str(), s))
        .chain([("macro", &cov.macro_avg)])
    {
        row("coverage", "", label, "c_p", s.c_p).map_err(wrap)?;
        row("coverage", "", label, "c_r", s.c_r).map_err(wrap)?;
    }
    if let Some(rbl) = &report.recall_by_length {
        for b in &rbl.buckets {
            row("recall_by_length", &b.bucket, rbl.label.as_str(), "recall", b.recall).map_err(wrap)?;
        }
    }
    w.flush().map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })
}

fn baseline(a: BaselineArgs, strictness: Strictness) -> Result<()> {
    use moc_core::models::ModelKind;

    let timelines = load_timelines(&a.timelines, &a.posts, strictness)?;
    let gold = match &a.gold {
        Some(p) => Some(io::read_labels(p, strictness)?),
        None if a.model == ModelKind::Majority => None,
        None => return Err(Error::InvalidParameter(format!("--gold is required for {}", a.model))),
    };
    let external = match &a.vectors {
        Some(p) => Some(ExternalVectors::from_records(io::read_vectors(p, strictness)?)?),
        None => None,
    };
    let cfg = PipelineConfig {
        model: a.model,
        folds: a.folds,
        seed: a.seed,
        context_radius: a.context_radius,
        meta_loss: Some(match a.loss {
            MetaLoss::Ce => LossChoice::CrossEntropy,
            MetaLoss::Focal => LossChoice::Focal { gamma: a.gamma },
        }),
        gamma: a.gamma,
        train: TrainConfig {
            epochs: a.epochs,
            batch_size: a.batch_size,
            learning_rate: a.learning_rate,
            l2: a.l2,
            seed: a.seed,
        },
        max_features: a.max_features,
        fsd_mode: match a.fsd_mode {
            FsdModeArg::Centroid => FsdMode::Centroid,
            FsdModeArg::Nearest => FsdMode::Nearest,
        },
        scd_dims: a.scd_dims,
        forecast_k: a.forecast_k,
        ridge_lambda: a.ridge_lambda,
        ..PipelineConfig::default()
    };
    let (predictions, folds) = match &gold {
        Some(gold) => {
            let cv = cross_validate(&timelines, gold, &cfg, external.as_ref())?;
            (cv.predictions, cv.folds)
        }
        None => (majority_baseline(&timelines), None),
    };
    io::write_labels(&a.out, &predictions)?;
    if let Some(path) = &a.folds_out {
        match &folds {
            Some(f) => io::write_json(path, f)?,
            None => log::warn!("{} is not cross-validated; no folds written", a.model),
        }
    }
    eprintln!("{}: {} timelines labelled", a.model, predictions.len());
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let report: MetricsReport = io::read_json(&a.input)?;
    let table = render_table(&report);
    match &a.out {
        Some(path) => fs::write(path, table).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        }),
        None => {
            print!("{table}");
            Ok(())
        }
    }
}
