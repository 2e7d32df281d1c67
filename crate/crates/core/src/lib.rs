//! Toolkit for detecting moments of change in user post timelines.
//!
//! The pipeline runs from raw posts to evaluation:
//!
//! 1. [`extraction`] builds daily post-count series and cuts timelines around
//!    change points found by [`changepoint`].
//! 2. [`annotation`] measures inter-annotator agreement and derives
//!    majority-vote gold labels.
//! 3. [`models`] provides baselines and feature pipelines whose predictions
//!    are scored by [`metrics`].
//! 4. [`synth`] generates corpora with planted structure for all of the above.

pub mod annotation;
pub mod changepoint;
pub mod error;
pub mod extraction;
pub mod folds;
pub mod io;
pub mod metrics;
pub mod models;
mod seeding;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use types::{extract_regions, Label, LabelSequence, Post, Region, Role, Timeline};
