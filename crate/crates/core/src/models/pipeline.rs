//! Cross-validated prediction for every model kind.
//!
//! Each fold fits its vocabulary, forecaster, feature scaling and classifier
//! on the training timelines only, then labels the held-out timelines.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::baselines::{majority_baseline, random_baseline, ClassPriors};
use super::fsd::{fsd_features, FsdMode, DEFAULT_HISTORY_SIZES};
use super::linear::TrainConfig;
use super::scd::{scd_op_features, Forecaster};
use super::sequence::{sequence_classifier, LabeledSequence, LossChoice};
use super::text::tokenize;
use super::tfidf::{SparseVector, TfidfVocabulary};
use crate::error::{Error, Result};
use crate::folds::{split_folds, FoldAssignment};
use crate::io::{align_labels, VectorRecord};
use crate::types::{LabelSequence, Timeline};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Majority,
    Random,
    LinearCe,
    LinearFocal,
    Fsd,
    ScdOp,
    ScdFp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 7] = [
        ModelKind::Majority,
        ModelKind::Random,
        ModelKind::LinearCe,
        ModelKind::LinearFocal,
        ModelKind::Fsd,
        ModelKind::ScdOp,
        ModelKind::ScdFp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Majority => "majority",
            ModelKind::Random => "random",
            ModelKind::LinearCe => "linear-ce",
            ModelKind::LinearFocal => "linear-focal",
            ModelKind::Fsd => "fsd",
            ModelKind::ScdOp => "scd-op",
            ModelKind::ScdFp => "scd-fp",
        }
    }

    fn uses_meta_features(self) -> bool {
        matches!(self, ModelKind::Fsd | ModelKind::ScdOp | ModelKind::ScdFp)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown model {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub model: ModelKind,
    pub folds: usize,
    /// Drives fold assignment, the random baseline and training order.
    pub seed: u64,
    /// Defaults to 0 for the tf-idf models and 2 for the meta-feature ones.
    pub context_radius: Option<usize>,
    /// Loss of the meta-feature models; cross-entropy unless set.
    pub meta_loss: Option<LossChoice>,
    pub gamma: f64,
    /// `train.seed` is replaced by `seed` plus the fold index.
    pub train: TrainConfig,
    /// Vocabulary cap for the tf-idf classifiers.
    pub max_features: Option<usize>,
    pub fsd_mode: FsdMode,
    pub history_sizes: Vec<usize>,
    /// Vocabulary cap for the dense tf-idf vectors used by the SCD models.
    pub scd_dims: usize,
    pub forecast_k: usize,
    pub ridge_lambda: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::LinearCe,
            folds: 5,
            seed: 0,
            context_radius: None,
            meta_loss: None,
            gamma: 2.0,
            train: TrainConfig::default(),
            max_features: None,
            fsd_mode: FsdMode::Centroid,
            history_sizes: DEFAULT_HISTORY_SIZES.to_vec(),
            scd_dims: 64,
            forecast_k: 3,
            ridge_lambda: 1.0,
        }
    }
}

impl PipelineConfig {
    pub fn radius(&self) -> usize {
        self.context_radius
            .unwrap_or(if self.model.uses_meta_features() { 2 } else { 0 })
    }

    fn loss(&self) -> LossChoice {
        match self.model {
            ModelKind::LinearFocal => LossChoice::Focal { gamma: self.gamma },
            m if m.uses_meta_features() => self.meta_loss.unwrap_or(LossChoice::CrossEntropy),
            _ => LossChoice::CrossEntropy,
        }
    }
}

/// Post representations computed elsewhere, keyed by timeline and post.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExternalVectors {
    dim: usize,
    vectors: BTreeMap<(String, String), Vec<f64>>,
}

impl ExternalVectors {
    pub fn from_records(records: Vec<VectorRecord>) -> Result<Self> {
        let dim = records.first().map_or(0, |r| r.vector.len());
        let mut vectors = BTreeMap::new();
        for r in records {
            if r.vector.len() != dim {
                return Err(Error::Alignment(format!(
                    "vector for {}/{} has {} dimensions, expected {dim}",
                    r.timeline_id,
                    r.post_id,
                    r.vector.len()
                )));
            }
            if r.vector.iter().any(|x| !x.is_finite()) {
                return Err(Error::Numerical(format!(
                    "non-finite vector for {}/{}",
                    r.timeline_id, r.post_id
                )));
            }
            if vectors
                .insert((r.timeline_id.clone(), r.post_id.clone()), r.vector)
                .is_some()
            {
                return Err(Error::DuplicateRecord(format!(
                    "vector for {}/{}",
                    r.timeline_id, r.post_id
                )));
            }
        }
        Ok(Self { dim, vectors })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn for_timeline(&self, t: &Timeline) -> Result<Vec<Vec<f64>>> {
        t.posts
            .iter()
            .map(|p| {
                self.vectors
                    .get(&(t.timeline_id.clone(), p.post_id.clone()))
                    .cloned()
                    .ok_or_else(|| Error::Alignment(format!("no vector for {}/{}", t.timeline_id, p.post_id)))
            })
            .collect()
    }
}

/// Cross-validated predictions, one sequence per timeline in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossValidation {
    pub predictions: Vec<LabelSequence>,
    /// `None` for the untrained baselines.
    pub folds: Option<FoldAssignment>,
}

/// Per-timeline model inputs of one fold.
struct FoldFeatures {
    rows: Vec<Vec<SparseVector>>,
    dim: usize,
}

pub fn cross_validate(
    timelines: &[Timeline],
    gold: &[LabelSequence],
    config: &PipelineConfig,
    external: Option<&ExternalVectors>,
) -> Result<CrossValidation> {
    let gold = align_labels(gold, timelines)?;
    match config.model {
        ModelKind::Majority => {
            return Ok(CrossValidation {
                predictions: majority_baseline(timelines),
                folds: None,
            })
        }
        ModelKind::Random => {
            let owned: Vec<LabelSequence> = gold.iter().map(|g| (*g).clone()).collect();
            let priors = ClassPriors::from_sequences(&owned)?;
            return Ok(CrossValidation {
                predictions: random_baseline(timelines, &priors, config.seed)?,
                folds: None,
            });
        }
        _ => {}
    }
    if external.is_some() && !config.model.uses_meta_features() {
        return Err(Error::InvalidParameter(format!(
            "{} does not take external vectors",
            config.model
        )));
    }

    let ids: Vec<&str> = timelines.iter().map(|t| t.timeline_id.as_str()).collect();
    let folds = split_folds(&ids, config.folds, config.seed)?;
    let tokens: Vec<Vec<Vec<String>>> = timelines
        .par_iter()
        .map(|t| t.posts.iter().map(|p| tokenize(&p.text)).collect())
        .collect();
    let fold_of: Vec<usize> = ids.iter().map(|id| folds.fold_of(id).unwrap_or(0)).collect();

    let per_fold: Vec<Vec<(usize, LabelSequence)>> = (0..folds.k())
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..timelines.len()).filter(|&i| fold_of[i] != f).collect();
            let test: Vec<usize> = (0..timelines.len()).filter(|&i| fold_of[i] == f).collect();
            let feats = fold_features(timelines, &tokens, &train, config, external)?;
            let labeled: Vec<LabeledSequence<'_>> = train
                .iter()
                .map(|&i| LabeledSequence {
                    rows: &feats.rows[i],
                    labels: &gold[i].labels,
                })
                .collect();
            let test_rows: Vec<&[SparseVector]> = test.iter().map(|&i| feats.rows[i].as_slice()).collect();
            let train_cfg = TrainConfig {
                seed: config.seed.wrapping_add(f as u64),
                ..config.train.clone()
            };
            let (_, preds) = sequence_classifier(
                &labeled,
                &test_rows,
                feats.dim,
                config.radius(),
                config.loss(),
                &train_cfg,
            )?;
            Ok(test
                .iter()
                .zip(preds)
                .map(|(&i, labels)| (i, LabelSequence::new(timelines[i].timeline_id.clone(), labels)))
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut slots: Vec<Option<LabelSequence>> = vec![None; timelines.len()];
    for (i, seq) in per_fold.into_iter().flatten() {
        slots[i] = Some(seq);
    }
    let predictions = slots
        .into_iter()
        .map(|s| s.ok_or_else(|| Error::Numerical("a timeline received no prediction".into())))
        .collect::<Result<_>>()?;
    Ok(CrossValidation {
        predictions,
        folds: Some(folds),
    })
}

fn fold_features(
    timelines: &[Timeline],
    tokens: &[Vec<Vec<String>>],
    train: &[usize],
    config: &PipelineConfig,
    external: Option<&ExternalVectors>,
) -> Result<FoldFeatures> {
    let train_docs = || train.iter().flat_map(|&i| tokens[i].iter()).collect::<Vec<_>>();
    match config.model {
        ModelKind::LinearCe | ModelKind::LinearFocal => {
            let vocab = TfidfVocabulary::fit(&train_docs(), config.max_features)?;
            let rows = tokens
                .par_iter()
                .map(|t| t.iter().map(|d| vocab.transform(d)).collect())
                .collect();
            Ok(FoldFeatures { rows, dim: vocab.len() })
        }
        ModelKind::Fsd => {
            let reps: Vec<Vec<SparseVector>> = match external {
                Some(ext) => timelines
                    .iter()
                    .map(|t| {
                        Ok(ext
                            .for_timeline(t)?
                            .iter()
                            .map(|v| SparseVector::from_dense(v))
                            .collect())
                    })
                    .collect::<Result<_>>()?,
                None => {
                    let vocab = TfidfVocabulary::fit(&train_docs(), None)?;
                    tokens
                        .par_iter()
                        .map(|t| t.iter().map(|d| vocab.transform(d)).collect())
                        .collect()
                }
            };
            let meta: Vec<Vec<Vec<f64>>> = reps
                .par_iter()
                .map(|r| fsd_features(r, &config.history_sizes, config.fsd_mode))
                .collect();
            Ok(standardized(meta, train, config.history_sizes.len() + 1))
        }
        ModelKind::ScdOp | ModelKind::ScdFp => {
            let dense = dense_representations(timelines, tokens, train, config, external)?;
            let dim = dense.iter().flatten().next().map_or(0, Vec::len);
            let meta: Vec<Vec<Vec<f64>>> = if config.model == ModelKind::ScdOp {
                dense.par_iter().map(|v| scd_op_features(v)).collect::<Result<_>>()?
            } else {
                let train_reps: Vec<&[Vec<f64>]> = train.iter().map(|&i| dense[i].as_slice()).collect();
                let fc = Forecaster::fit(&train_reps, config.forecast_k, config.ridge_lambda)?;
                dense
                    .par_iter()
                    .zip(timelines)
                    .map(|(v, t)| {
                        if v.len() <= fc.k() {
                            log::warn!(
                                "timeline {} is too short to forecast; using zero features",
                                t.timeline_id
                            );
                            return Ok(vec![vec![0.0; dim]; v.len()]);
                        }
                        fc.errors(v)
                    })
                    .collect::<Result<_>>()?
            };
            Ok(standardized(meta, train, dim))
        }
        ModelKind::Majority | ModelKind::Random => unreachable!("baselines are not trained"),
    }
}

fn dense_representations(
    timelines: &[Timeline],
    tokens: &[Vec<Vec<String>>],
    train: &[usize],
    config: &PipelineConfig,
    external: Option<&ExternalVectors>,
) -> Result<Vec<Vec<Vec<f64>>>> {
    if let Some(ext) = external {
        return timelines.iter().map(|t| ext.for_timeline(t)).collect();
    }
    let docs: Vec<&Vec<String>> = train.iter().flat_map(|&i| tokens[i].iter()).collect();
    let vocab = TfidfVocabulary::fit(&docs, Some(config.scd_dims))?;
    Ok(tokens
        .par_iter()
        .map(|t| t.iter().map(|d| vocab.transform(d).to_dense(vocab.len())).collect())
        .collect())
}

/// Z-scores every column with the mean and deviation of the training rows.
fn standardized(meta: Vec<Vec<Vec<f64>>>, train: &[usize], dim: usize) -> FoldFeatures {
    let mut mean = vec![0.0; dim];
    let mut sq = vec![0.0; dim];
    let mut n = 0.0;
    for row in train.iter().flat_map(|&i| &meta[i]) {
        n += 1.0;
        for j in 0..dim {
            mean[j] += row[j];
            sq[j] += row[j] * row[j];
        }
    }
    let n = f64::max(n, 1.0);
    let scale: Vec<f64> = (0..dim)
        .map(|j| {
            mean[j] /= n;
            let var = sq[j] / n - mean[j] * mean[j];
            if var > 1e-24 {
                1.0 / var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let rows = meta
        .into_iter()
        .map(|t| {
            t.into_iter()
                .map(|row| {
                    let z: Vec<f64> = (0..dim).map(|j| (row[j] - mean[j]) * scale[j]).collect();
                    SparseVector::from_dense(&z)
                })
                .collect()
        })
        .collect();
    FoldFeatures { rows, dim }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Label, Post};
    use chrono::{Duration, NaiveDate, TimeZone, Utc};

    fn corpus(n: usize) -> (Vec<Timeline>, Vec<LabelSequence>) {
        let base = Utc.with_ymd_and_hms(2021, 3, 1, 9, 0, 0).unwrap();
        let mut timelines = Vec::new();
        let mut gold = Vec::new();
        for u in 0..n {
            let user = format!("u{u}");
            let mut posts = Vec::new();
            let mut labels = Vec::new();
            for i in 0..12 {
                let label = if i == 5 + u % 3 { Label::IS } else { Label::O };
                let text = if label == Label::IS {
                    "suddenly everything is awful"
                } else {
                    "a calm ordinary day"
                };
                posts.push(Post::new(
                    &user,
                    format!("{user}-{i}"),
                    base + Duration::hours(i as i64),
                    text,
                ));
                labels.push(label);
            }
            let id = format!("{user}_20210301");
            timelines.push(Timeline::new(&id, &user, NaiveDate::from_ymd_opt(2021, 3, 1).unwrap(), posts).unwrap());
            gold.push(LabelSequence::new(id, labels));
        }
        (timelines, gold)
    }

    #[test]
    fn model_names_round_trip() {
        for m in ModelKind::ALL {
            assert_eq!(m.as_str().parse::<ModelKind>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{m}\""));
        }
        assert!("bert".parse::<ModelKind>().is_err());
    }

    #[test]
    fn every_model_covers_every_timeline() {
        let (timelines, gold) = corpus(10);
        for model in ModelKind::ALL {
            let cfg = PipelineConfig {
                model,
                ..PipelineConfig::default()
            };
            let cv = cross_validate(&timelines, &gold, &cfg, None).unwrap();
            assert_eq!(cv.predictions.len(), timelines.len(), "{model}");
            for (p, t) in cv.predictions.iter().zip(&timelines) {
                assert_eq!(p.timeline_id, t.timeline_id);
                assert_eq!(p.len(), t.len());
            }
            let again = cross_validate(&timelines, &gold, &cfg, None).unwrap();
            assert_eq!(cv, again, "{model} is not deterministic");
        }
    }

    #[test]
    fn linear_model_learns_the_planted_word() {
        let (timelines, gold) = corpus(20);
        let cfg = PipelineConfig::default();
        let cv = cross_validate(&timelines, &gold, &cfg, None).unwrap();
        assert_eq!(cv.predictions, gold);
    }

    #[test]
    fn external_vectors_are_used_and_checked() {
        let (timelines, gold) = corpus(10);
        let mut records: Vec<VectorRecord> = timelines
            .iter()
            .flat_map(|t| {
                t.posts.iter().enumerate().map(|(i, p)| VectorRecord {
                    timeline_id: t.timeline_id.clone(),
                    post_id: p.post_id.clone(),
                    vector: vec![(i as f64).cos(), (i as f64).sin(), 1.0],
                    extra: Default::default(),
                })
            })
            .collect();
        let ext = ExternalVectors::from_records(records.clone()).unwrap();
        for model in [ModelKind::Fsd, ModelKind::ScdOp, ModelKind::ScdFp] {
            let cfg = PipelineConfig {
                model,
                ..PipelineConfig::default()
            };
            assert!(cross_validate(&timelines, &gold, &cfg, Some(&ext)).is_ok());
        }
        records.pop();
        let partial = ExternalVectors::from_records(records.clone()).unwrap();
        let cfg = PipelineConfig {
            model: ModelKind::Fsd,
            ..PipelineConfig::default()
        };
        assert!(matches!(
            cross_validate(&timelines, &gold, &cfg, Some(&partial)),
            Err(Error::Alignment(_))
        ));
        records[0].vector.push(0.0);
        assert!(ExternalVectors::from_records(records).is_err());
    }

    #[test]
    fn gold_must_align() {
        let (timelines, mut gold) = corpus(6);
        gold[0].labels.pop();
        assert!(cross_validate(&timelines, &gold, &PipelineConfig::default(), None).is_err());
    }
}
