//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use chrono::{DateTime, NaiveDate};
use moc_core::annotation::{
    aggregate, majority_label, positive_agreement, AgreementMode, AnnotationRecord, AnnotationSet,
};
use moc_core::changepoint::{detect, run_bocpd, CountSeries, DetectorConfig, GammaParams};
use moc_core::metrics::{
    coverage, evaluate, matched_within_window, post_level, post_level_single, windowed, EvaluationConfig, SequencePair,
};
use moc_core::models::{
    focal_loss, majority_baseline, random_sequences, scd_procrustes, sequence_classifier, ClassPriors, LabeledSequence,
    LinearModel, LossChoice, LossKind, SparseVector, TrainConfig,
};
use moc_core::synth::{generate, neighbor_contrast_corpus, ContrastConfig, SynthConfig};
use moc_core::{Label, LabelSequence, Post, Role, Timeline};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn near(x: Option<f64>, target: f64, tol: f64) -> bool {
    x.is_some_and(|v| (v - target).abs() <= tol)
}

fn fmt(x: Option<f64>) -> String {
    x.map_or("undef".into(), |v| format!("{v:.4}"))
}

fn random_labels(rng: &mut ChaCha8Rng, n: usize) -> Vec<Label> {
    (0..n)
        .map(|_| match rng.random_range(0..10) {
            0..=1 => Label::IS,
            2..=4 => Label::IE,
            _ => Label::O,
        })
        .collect()
}

fn shuffled_counts(counts: &[(Label, usize)], seed: u64) -> Vec<Label> {
    let mut all: Vec<Label> = counts.iter().flat_map(|&(l, c)| std::iter::repeat_n(l, c)).collect();
    all.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    all
}

// 1

fn majority_baseline_scores() -> Outcome {
    let start = Instant::now();
    let gold_flat = shuffled_counts(&[(Label::O, 15_799), (Label::IE, 2_018), (Label::IS, 885)], 1);
    let t0 = DateTime::from_timestamp(1_600_000_000, 0).unwrap();
    let (mut timelines, mut gold) = (Vec::new(), Vec::new());
    let mut offset = 0;
    for i in 0..500 {
        let n = 37 + usize::from(i < 202);
        let user = format!("u{i:03}");
        let posts = (0..n)
            .map(|j| {
                Post::new(
                    &user,
                    format!("{user}-{j:03}"),
                    t0 + chrono::Duration::hours(j as i64),
                    "x",
                )
            })
            .collect();
        let id = format!("{user}_t");
        timelines.push(Timeline::new(&id, &user, t0.date_naive(), posts).unwrap());
        gold.push(LabelSequence::new(id, gold_flat[offset..offset + n].to_vec()));
        offset += n;
    }
    assert_eq!(offset, 18_702);
    let pred = majority_baseline(&timelines);
    let report = evaluate(&gold, &pred, &EvaluationConfig::default()).map_err(|e| e.to_string())?;
    let o = report.post_level.label(Label::O);
    let m = &report.post_level.macro_avg;
    let elapsed = start.elapsed();
    let ok = near(o.precision, 0.845, 0.001)
        && near(o.recall, 1.0, 0.001)
        && near(o.f1, 0.916, 0.001)
        && near(m.precision, 0.282, 0.001)
        && near(m.recall, 0.333, 0.001)
        && near(m.f1, 0.305, 0.001)
        && elapsed < Duration::from_secs(5);
    check(
        ok,
        format!(
            "O P/R/F1 {}/{}/{}, macro P/R/F1 {}/{}/{}, {:.2?}",
            fmt(o.precision),
            fmt(o.recall),
            fmt(o.f1),
            fmt(m.precision),
            fmt(m.recall),
            fmt(m.f1),
            elapsed
        ),
    )
}

// 2

fn random_baseline_scores() -> Outcome {
    let start = Instant::now();
    let priors = ClassPriors::new(0.845, 0.047, 0.108).map_err(|e| e.to_string())?;
    let gold_flat = shuffled_counts(&[(Label::O, 845_000), (Label::IE, 108_000), (Label::IS, 47_000)], 2);
    let ids: Vec<String> = (0..10_000).map(|i| format!("t{i:05}")).collect();
    let shapes: Vec<(&str, usize)> = ids.iter().map(|id| (id.as_str(), 100)).collect();
    let pred = random_sequences(&shapes, &priors, 2).map_err(|e| e.to_string())?;
    let pairs: Vec<SequencePair> = pred
        .iter()
        .enumerate()
        .map(|(i, p)| SequencePair {
            timeline_id: &p.timeline_id,
            gold: &gold_flat[i * 100..(i + 1) * 100],
            pred: &p.labels,
        })
        .collect();
    let scores = post_level(&pairs);
    let elapsed = start.elapsed();
    let mut ok = elapsed < Duration::from_secs(30);
    let mut parts = Vec::new();
    for l in Label::ALL {
        let s = scores.label(l);
        let p = priors.get(l);
        ok &= near(s.precision, p, 0.01) && near(s.recall, p, 0.01) && near(s.f1, p, 0.01);
        parts.push(format!(
            "{l} {}/{}/{} (prior {p})",
            fmt(s.precision),
            fmt(s.recall),
            fmt(s.f1)
        ));
    }
    check(ok, format!("{}, {:.2?}", parts.join(", "), elapsed))
}

// 3

fn oracle_regions(labels: &[Label], label: Label) -> Vec<BTreeSet<usize>> {
    let mut out: Vec<BTreeSet<usize>> = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        if l != label {
            continue;
        }
        match out.last_mut() {
            Some(r) if r.contains(&(i.wrapping_sub(1))) => {
                r.insert(i);
            }
            _ => {
                out.push(BTreeSet::from([i]));
            }
        }
    }
    out
}

fn oracle_overlap(reference: &[BTreeSet<usize>], candidates: &[BTreeSet<usize>]) -> Option<f64> {
    let total: usize = reference.iter().map(BTreeSet::len).sum();
    if total == 0 {
        return None;
    }
    let mut acc = 0.0;
    for r in reference {
        let mut best = 0.0f64;
        for c in candidates {
            let inter = r.intersection(c).count() as f64;
            let union = r.union(c).count() as f64;
            best = best.max(inter / union);
        }
        acc += r.len() as f64 * best;
    }
    Some(acc / total as f64)
}

fn round12(x: Option<f64>) -> Option<i64> {
    x.map(|v| (v * 1e12).round() as i64)
}

fn coverage_oracle() -> Outcome {
    let mut gold = vec![Label::O; 10];
    let mut pred = vec![Label::O; 10];
    gold[2..=5].fill(Label::IE);
    pred[4..=7].fill(Label::IE);
    let hand = coverage(&gold, &pred, Label::IE).map_err(|e| e.to_string())?;
    let third = 1.0 / 3.0;
    if !(near(hand.c_p, third, 1e-12) && near(hand.c_r, third, 1e-12)) {
        return Err(format!(
            "hand example gives C_p {} C_r {}",
            fmt(hand.c_p),
            fmt(hand.c_r)
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=25);
        let g = random_labels(&mut rng, n);
        let p = random_labels(&mut rng, n);
        for l in Label::ALL {
            let got = coverage(&g, &p, l).map_err(|e| e.to_string())?;
            let (rg, rp) = (oracle_regions(&g, l), oracle_regions(&p, l));
            if round12(got.c_p) != round12(oracle_overlap(&rp, &rg))
                || round12(got.c_r) != round12(oracle_overlap(&rg, &rp))
            {
                mismatches += 1;
            }
        }
    }
    check(
        mismatches == 0,
        format!("hand example 1/3 and 1/3, {mismatches} mismatches over 1000 timelines x 3 labels"),
    )
}

// 4

fn exhaustive_matching(gold: &[usize], pred: &[usize], w: usize) -> usize {
    fn go(i: usize, used: u32, gold: &[usize], pred: &[usize], w: usize) -> usize {
        if i == gold.len() {
            return 0;
        }
        let mut best = go(i + 1, used, gold, pred, w);
        for (j, &p) in pred.iter().enumerate() {
            if used & (1 << j) == 0 && p.abs_diff(gold[i]) <= w {
                best = best.max(1 + go(i + 1, used | (1 << j), gold, pred, w));
            }
        }
        best
    }
    go(0, 0, gold, pred, w)
}

fn bits(mask: u32) -> Vec<usize> {
    (0..8).filter(|i| mask & (1 << i) != 0).collect()
}

fn matching_oracle() -> Outcome {
    let mut instances = 0usize;
    let mut discrepancies = 0usize;
    for gm in 0u32..256 {
        let g = bits(gm);
        for pm in 0u32..256 {
            let p = bits(pm);
            for w in 0..=3 {
                instances += 1;
                if matched_within_window(&g, &p, w) != exhaustive_matching(&g, &p, w) {
                    discrepancies += 1;
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20_000 {
        let n = rng.random_range(1..=40);
        let (kg, kp) = (rng.random_range(0..=8), rng.random_range(0..=8));
        let mut pick = |k: usize| {
            let mut v: Vec<usize> = (0..n).collect();
            v.shuffle(&mut rng);
            let mut v: Vec<usize> = v.into_iter().take(k.min(n)).collect();
            v.sort_unstable();
            v
        };
        let g = pick(kg);
        let p = pick(kp);
        for w in 0..=3 {
            instances += 1;
            if matched_within_window(&g, &p, w) != exhaustive_matching(&g, &p, w) {
                discrepancies += 1;
            }
        }
    }
    check(
        discrepancies == 0,
        format!("{discrepancies} discrepancies over {instances} instances"),
    )
}

// 5

fn reduction_and_monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut reduction, mut monotone) = (0, 0);
    for _ in 0..1000 {
        let n = rng.random_range(1..=40);
        let g = random_labels(&mut rng, n);
        let p = random_labels(&mut rng, n);
        let pl = post_level_single(&g, &p).map_err(|e| e.to_string())?;
        for l in Label::ALL {
            let scores: Vec<_> = (0..=6).map(|w| windowed(&g, &p, l, w).unwrap()).collect();
            let c = pl.label(l);
            if scores[0].precision != c.precision || scores[0].recall != c.recall {
                reduction += 1;
            }
            for s in scores.windows(2) {
                let up = |a: Option<f64>, b: Option<f64>| match (a, b) {
                    (Some(a), Some(b)) => a <= b,
                    (None, None) => true,
                    _ => false,
                };
                if !up(s[0].precision, s[1].precision) || !up(s[0].recall, s[1].recall) {
                    monotone += 1;
                }
            }
        }
    }
    check(
        reduction + monotone == 0,
        format!("{reduction} w=0 reduction violations, {monotone} monotonicity violations over 1000 timelines"),
    )
}

// 6

fn shifted_prediction() -> Outcome {
    let mut gold = vec![Label::O; 10];
    let mut pred = vec![Label::O; 10];
    gold[5] = Label::IS;
    pred[6] = Label::IS;
    let pl = post_level_single(&gold, &pred).map_err(|e| e.to_string())?;
    let w1 = windowed(&gold, &pred, Label::IS, 1).map_err(|e| e.to_string())?;
    let f1 = pl.label(Label::IS).f1;
    check(
        f1 == Some(0.0) && w1.precision == Some(1.0) && w1.recall == Some(1.0),
        format!(
            "post-level IS F1 {}, P1 {}, R1 {}",
            fmt(f1),
            fmt(w1.precision),
            fmt(w1.recall)
        ),
    )
}

// 7

fn planted_series(lo: f64, hi: f64, seed: u64) -> CountSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b) = (Poisson::new(lo).unwrap(), Poisson::new(hi).unwrap());
    let counts = (0..60)
        .map(|d| if d < 30 { a.sample(&mut rng) } else { b.sample(&mut rng) } as u32)
        .collect();
    CountSeries {
        user_id: "u".into(),
        start_date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
        counts,
    }
}

fn localized(lo: f64, hi: f64, max_sum_err: &mut f64) -> usize {
    let cfg = DetectorConfig::default();
    (0..100)
        .filter(|&seed| {
            let s = planted_series(lo, hi, seed);
            let post = run_bocpd(&s, cfg.prior, cfg.hazard).unwrap();
            for t in 0..post.len() {
                let sum: f64 = post.step(t).iter().map(|&(_, p)| p).sum();
                *max_sum_err = max_sum_err.max((sum - 1.0).abs());
            }
            detect(&s, &cfg).unwrap().iter().any(|c| c.day_index.abs_diff(30) <= 2)
        })
        .count()
}

fn rising_factorial(a: f64, n: u32) -> f64 {
    (0..n).map(|k| a + k as f64).product()
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

fn segment_evidence(xs: &[u32], shape: f64, rate: f64) -> f64 {
    let s: u32 = xs.iter().sum();
    let n = xs.len() as f64;
    rate.powf(shape) * rising_factorial(shape, s)
        / (rate + n).powf(shape + s as f64)
        / xs.iter().map(|&x| factorial(x)).product::<f64>()
}

/// Run-length posterior at the last day of `xs` by summing over every
/// segmentation of the series.
fn enumerated_posterior(xs: &[u32], shape: f64, rate: f64, hazard: f64) -> Vec<f64> {
    let t = xs.len() - 1;
    let mut out = vec![0.0; t + 1];
    for mask in 0u32..(1 << t) {
        let mut prior = 1.0;
        let mut starts = vec![0];
        for s in 1..=t {
            if mask & (1 << (s - 1)) != 0 {
                prior *= hazard;
                starts.push(s);
            } else {
                prior *= 1.0 - hazard;
            }
        }
        let mut ends: Vec<usize> = starts[1..].to_vec();
        ends.push(t + 1);
        let evidence: f64 = starts
            .iter()
            .zip(&ends)
            .map(|(&a, &b)| segment_evidence(&xs[a..b], shape, rate))
            .product();
        out[t - starts.last().unwrap()] += prior * evidence;
    }
    let z: f64 = out.iter().sum();
    out.iter().map(|p| p / z).collect()
}

fn bocpd_recovery() -> Outcome {
    let mut sum_err = 0.0f64;
    let strong = localized(1.0, 8.0, &mut sum_err);
    let ratio3 = localized(20.0, 60.0, &mut sum_err);
    for (lo, hi) in [(1.0, 3.0), (1.0, 4.0), (10.0, 30.0)] {
        let n = localized(lo, hi, &mut sum_err);
        println!("      info: rates {lo} -> {hi}: localized within 2 days in {n}/100 runs");
    }

    let mut enum_err = 0.0f64;
    let series: [&[u32]; 4] = [&[0, 1, 5, 6, 2], &[3, 3, 0, 0, 9], &[1, 0, 1, 0, 1], &[7, 2, 0, 4, 4]];
    for (i, xs) in series.iter().enumerate() {
        for &(shape, rate, hazard) in &[(1.0, 1.0, 0.01), (2.5, 0.7, 0.2), (0.5, 2.0, 0.5)] {
            let s = CountSeries {
                user_id: format!("e{i}"),
                start_date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
                counts: xs.to_vec(),
            };
            let prior = GammaParams::new(shape, rate).map_err(|e| e.to_string())?;
            let post = run_bocpd(&s, prior, hazard).map_err(|e| e.to_string())?;
            for t in 0..xs.len() {
                let oracle = enumerated_posterior(&xs[..=t], shape, rate, hazard);
                for (a, b) in post.dense(t).iter().zip(&oracle) {
                    enum_err = enum_err.max((a - b).abs());
                }
            }
        }
    }
    check(
        strong >= 90 && ratio3 >= 90 && sum_err < 1e-9 && enum_err < 1e-9,
        format!(
            "rates 1->8 localized {strong}/100, 20->60 localized {ratio3}/100, max |sum-1| {sum_err:.1e}, max enumeration error {enum_err:.1e}"
        ),
    )
}

// 8

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn procrustes() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut worst_residual, mut worst_orth) = (0.0f64, 0.0f64);
    for i in 0..100 {
        let d = 2 + i % 9;
        let n = d + 5 + i % 7;
        let q = gaussian(d, d, &mut rng).qr().q();
        let a = gaussian(n, d, &mut rng);
        let b = &a * &q;
        let p = scd_procrustes(&a, &b).map_err(|e| e.to_string())?;
        worst_residual = worst_residual.max(p.residual.norm());
        worst_orth = worst_orth.max((p.omega.transpose() * &p.omega - DMatrix::identity(d, d)).norm());
    }
    check(
        worst_residual < 1e-8 && worst_orth < 1e-10,
        format!("max residual {worst_residual:.1e}, max |W^T W - I|_F {worst_orth:.1e} over 100 instances"),
    )
}

// 9

fn focal() -> Outcome {
    let hand = focal_loss(0.9, 1.0, 2.0).map_err(|e| e.to_string())?;
    let mut ce_err = 0.0f64;
    for k in 1..=1000 {
        let p = k as f64 / 1000.0;
        ce_err = ce_err.max((focal_loss(p, 1.0, 0.0).unwrap() + p.ln()).abs());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let rows: Vec<SparseVector> = (0..12)
        .map(|_| SparseVector::from_dense(&(0..5).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>()))
        .collect();
    let targets: Vec<usize> = (0..12).map(|i| i % 3).collect();
    let refs: Vec<&SparseVector> = rows.iter().collect();
    let mut grad_err = 0.0f64;
    for loss in [
        LossKind::Focal {
            gamma: 2.0,
            alpha: vec![1.0, 2.0, 0.5],
        },
        LossKind::Focal {
            gamma: 0.5,
            alpha: vec![1.0, 1.0, 1.0],
        },
        LossKind::CrossEntropy,
    ] {
        let mut model = LinearModel::zeros(3, 5, loss);
        let params: Vec<f64> = (0..model.parameters().len())
            .map(|_| rng.random_range(-0.5..0.5))
            .collect();
        model.set_parameters(&params);
        let (_, grad) = model.objective_and_gradient(&refs, &targets, 0.01);
        let h = 1e-6;
        for i in 0..params.len() {
            let mut shifted = params.clone();
            shifted[i] += h;
            model.set_parameters(&shifted);
            let up = model.objective_and_gradient(&refs, &targets, 0.01).0;
            shifted[i] -= 2.0 * h;
            model.set_parameters(&shifted);
            let down = model.objective_and_gradient(&refs, &targets, 0.01).0;
            grad_err = grad_err.max(((up - down) / (2.0 * h) - grad[i]).abs());
        }
    }
    check(
        (hand - 0.0010536).abs() < 5e-8 && ce_err < 1e-12 && grad_err < 1e-6,
        format!("FL(0.9) = {hand:.7}, max gamma=0 vs CE error {ce_err:.1e}, max gradient error {grad_err:.1e}"),
    )
}

// 10

fn record(tl: &str, post: &str, annotator: &str, label: Label) -> AnnotationRecord {
    AnnotationRecord {
        timeline_id: tl.into(),
        post_id: post.into(),
        annotator_id: annotator.into(),
        label,
        role: if label == Label::O { Role::None } else { Role::InRegion },
        extra: Default::default(),
    }
}

fn aggregation() -> Outcome {
    let corpus = generate(&SynthConfig {
        n_users: 100,
        annotator_noise: vec![0.0; 3],
        seed: 10,
        ..SynthConfig::default()
    })
    .map_err(|e| e.to_string())?;
    let ann = AnnotationSet::from_records(corpus.annotations).map_err(|e| e.to_string())?;
    let derived = aggregate(&ann, &corpus.timelines).map_err(|e| e.to_string())?;
    let exact = derived
        .iter()
        .zip(&corpus.gold)
        .all(|(d, g)| d.labels == g.labels && d.roles == g.roles);

    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut violations = 0;
    for s in 0..1000 {
        let n_annotators = rng.random_range(2..=4);
        let mut records = Vec::new();
        for t in 0..rng.random_range(1..=4) {
            for p in 0..rng.random_range(1..=12) {
                for a in 0..n_annotators {
                    if rng.random_bool(0.9) {
                        let l = random_labels(&mut rng, 1)[0];
                        records.push(record(&format!("s{s}t{t}"), &format!("p{p}"), &format!("a{a}"), l));
                    }
                }
            }
        }
        let set = AnnotationSet::from_records(records).map_err(|e| e.to_string())?;
        if set.is_empty() {
            continue;
        }
        for l in Label::ALL {
            let perfect = positive_agreement(&set, l, AgreementMode::Perfect);
            let majority = positive_agreement(&set, l, AgreementMode::Majority);
            match (perfect, majority) {
                (Ok(Some(p)), Ok(Some(m))) if p <= m => {}
                (Ok(None), Ok(None)) => {}
                (Err(_), Err(_)) => {}
                _ => violations += 1,
            }
        }
    }
    let tie = majority_label(&[Label::IS, Label::IE, Label::O]);
    check(
        exact && violations == 0 && tie == Label::O,
        format!("noise-0 gold reproduced: {exact}, perfect > majority in {violations}/1000 sets, (IS,IE,O) -> {tie}"),
    )
}

// 11

fn macro_f1(gold: &[&[Label]], pred: &[Vec<Label>]) -> f64 {
    let pairs: Vec<SequencePair> = gold
        .iter()
        .zip(pred)
        .map(|(g, p)| SequencePair {
            timeline_id: "",
            gold: g,
            pred: p,
        })
        .collect();
    post_level(&pairs).macro_avg.f1.unwrap_or(0.0)
}

fn longitudinal_ablation() -> Outcome {
    let cfg = ContrastConfig::default();
    let train_cfg = TrainConfig::default();
    let (mut with_ctx, mut without) = (0.0, 0.0);
    for seed in 0..10 {
        let corpus = neighbor_contrast_corpus(&cfg, seed).map_err(|e| e.to_string())?;
        let (train, test) = corpus.split_at(corpus.len() * 4 / 5);
        let train: Vec<LabeledSequence> = train
            .iter()
            .map(|s| LabeledSequence {
                rows: &s.rows,
                labels: &s.labels,
            })
            .collect();
        let test_rows: Vec<&[SparseVector]> = test.iter().map(|s| s.rows.as_slice()).collect();
        let test_gold: Vec<&[Label]> = test.iter().map(|s| s.labels.as_slice()).collect();
        for (radius, acc) in [(2, &mut with_ctx), (0, &mut without)] {
            let (_, pred) = sequence_classifier(
                &train,
                &test_rows,
                cfg.dim,
                radius,
                LossChoice::CrossEntropy,
                &train_cfg,
            )
            .map_err(|e| e.to_string())?;
            *acc += macro_f1(&test_gold, &pred) / 10.0;
        }
    }
    check(
        with_ctx - without > 0.05,
        format!(
            "mean macro-F1 c=2 {with_ctx:.3} vs c=0 {without:.3}, gap {:.3}",
            with_ctx - without
        ),
    )
}

// 12

fn moc(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_moc"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "moc {} failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn pipeline(dir: &Path, seed: &str) -> Result<Vec<(String, Vec<u8>)>, String> {
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    moc(&["synth", "--seed", seed, "--out-dir", &p("synth")])?;
    moc(&[
        "extract",
        "--posts",
        &p("synth/posts.jsonl"),
        "--out",
        &p("timelines.jsonl"),
        "--summary",
        &p("summary.json"),
    ])?;
    moc(&[
        "aggregate",
        "--annotations",
        &p("synth/annotations.jsonl"),
        "--timelines",
        &p("timelines.jsonl"),
        "--posts",
        &p("synth/posts.jsonl"),
        "--out",
        &p("gold.jsonl"),
    ])?;
    moc(&[
        "baseline",
        "--model",
        "linear-ce",
        "--timelines",
        &p("timelines.jsonl"),
        "--posts",
        &p("synth/posts.jsonl"),
        "--gold",
        &p("gold.jsonl"),
        "--seed",
        seed,
        "--out",
        &p("pred.jsonl"),
    ])?;
    moc(&[
        "evaluate",
        "--gold",
        &p("gold.jsonl"),
        "--pred",
        &p("pred.jsonl"),
        "--out",
        &p("report.json"),
    ])?;
    let mut files = Vec::new();
    for name in [
        "synth/posts.jsonl",
        "synth/timelines.jsonl",
        "synth/annotations.jsonl",
        "synth/gold.jsonl",
        "timelines.jsonl",
        "summary.json",
        "gold.jsonl",
        "pred.jsonl",
        "report.json",
    ] {
        files.push((
            name.to_owned(),
            std::fs::read(dir.join(name)).map_err(|e| format!("{name}: {e}"))?,
        ));
    }
    Ok(files)
}

fn end_to_end() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let start = Instant::now();
    let first = pipeline(a.path(), "12")?;
    let elapsed = start.elapsed();
    let second = pipeline(b.path(), "12")?;
    let differing: Vec<&str> = first
        .iter()
        .zip(&second)
        .filter(|(x, y)| x.1 != y.1)
        .map(|(x, _)| x.0.as_str())
        .collect();
    let report: serde_json::Value = serde_json::from_slice(&first.last().unwrap().1).map_err(|e| e.to_string())?;
    let f1 = report["post_level"]["macro"]["f1"].as_f64();
    check(
        differing.is_empty() && elapsed < Duration::from_secs(60),
        format!(
            "first run {elapsed:.2?}, macro-F1 {}, outputs differing between runs: {differing:?}",
            fmt(f1)
        ),
    )
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("majority baseline", majority_baseline_scores),
        ("random baseline", random_baseline_scores),
        ("coverage oracle", coverage_oracle),
        ("matching oracle", matching_oracle),
        ("w=0 reduction and monotonicity", reduction_and_monotonicity),
        ("shifted-prediction divergence", shifted_prediction),
        ("BOCPD recovery", bocpd_recovery),
        ("Procrustes", procrustes),
        ("focal loss", focal),
        ("aggregation and IAA", aggregation),
        ("longitudinal ablation", longitudinal_ablation),
        ("end-to-end pipeline", end_to_end),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({detail})", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
