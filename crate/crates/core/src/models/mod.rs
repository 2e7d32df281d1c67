//! Baselines, post representations, change-signal features and the
//! classifiers trained on them.

mod baselines;
mod bigrams;
mod fsd;
mod linear;
mod pipeline;
mod scd;
mod sequence;
mod text;
mod tfidf;

pub use baselines::{majority_baseline, random_baseline, random_sequences, ClassPriors};
pub use bigrams::{bigram_train_config, error_correlation_bigrams, BigramWeight};
pub use fsd::{fsd_features, FsdMode, DEFAULT_HISTORY_SIZES};
pub use linear::{class_frequencies, focal_alpha, focal_loss, train_linear, LinearModel, LossKind, TrainConfig};
pub use pipeline::{cross_validate, CrossValidation, ExternalVectors, ModelKind, PipelineConfig};
pub use scd::{ridge_regression, scd_op_features, scd_procrustes, Forecaster, Procrustes};
pub use sequence::{sequence_classifier, with_context, LabeledSequence, LossChoice, MetaFeatureSequence};
pub use text::{bigrams, tokenize};
pub use tfidf::{tfidf_featurize, SparseVector, TfidfVocabulary};
