//! Majority and random label baselines.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding::derive_seed;
use crate::types::{Label, LabelSequence, Timeline};

/// All-O predictions.
pub fn majority_baseline(timelines: &[Timeline]) -> Vec<LabelSequence> {
    timelines
        .iter()
        .map(|t| LabelSequence::new(t.timeline_id.clone(), vec![Label::O; t.len()]))
        .collect()
}

/// Label distribution used by the random baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassPriors {
    #[serde(rename = "O")]
    pub o: f64,
    #[serde(rename = "IS")]
    pub is: f64,
    #[serde(rename = "IE")]
    pub ie: f64,
}

impl ClassPriors {
    pub fn new(o: f64, is: f64, ie: f64) -> Result<Self> {
        let p = Self { o, is, ie };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.o, self.is, self.ie];
        if all.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidDistribution(format!("priors {all:?} outside [0, 1]")));
        }
        let sum: f64 = all.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!("priors sum to {sum}")));
        }
        Ok(())
    }

    /// Empirical label frequencies.
    pub fn from_sequences(seqs: &[LabelSequence]) -> Result<Self> {
        let mut counts = [0usize; 3];
        for l in seqs.iter().flat_map(|s| &s.labels) {
            counts[l.index()] += 1;
        }
        let n: usize = counts.iter().sum();
        if n == 0 {
            return Err(Error::InvalidDistribution("no labels to estimate priors from".into()));
        }
        let f = |l: Label| counts[l.index()] as f64 / n as f64;
        Ok(Self {
            o: f(Label::O),
            is: f(Label::IS),
            ie: f(Label::IE),
        })
    }

    pub fn get(&self, label: Label) -> f64 {
        match label {
            Label::O => self.o,
            Label::IS => self.is,
            Label::IE => self.ie,
        }
    }

    fn sample(&self, rng: &mut impl Rng) -> Label {
        let u: f64 = rng.random();
        if u < self.o {
            Label::O
        } else if u < self.o + self.ie {
            Label::IE
        } else if self.is > 0.0 {
            Label::IS
        } else if self.ie > 0.0 {
            Label::IE
        } else {
            Label::O
        }
    }
}

/// I.i.d. labels for `(timeline_id, length)` pairs. Each timeline draws from
/// its own generator seeded by `seed` and its id, so output does not depend
/// on the order or grouping of timelines.
pub fn random_sequences(shapes: &[(&str, usize)], priors: &ClassPriors, seed: u64) -> Result<Vec<LabelSequence>> {
    priors.validate()?;
    Ok(shapes
        .par_iter()
        .map(|&(id, len)| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, id));
            let labels = (0..len).map(|_| priors.sample(&mut rng)).collect();
            LabelSequence::new(id, labels)
        })
        .collect())
}

pub fn random_baseline(timelines: &[Timeline], priors: &ClassPriors, seed: u64) -> Result<Vec<LabelSequence>> {
    let shapes: Vec<(&str, usize)> = timelines.iter().map(|t| (t.timeline_id.as_str(), t.len())).collect();
    random_sequences(&shapes, priors, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn priors_are_validated() {
        assert!(ClassPriors::new(0.845, 0.047, 0.108).is_ok());
        assert!(matches!(
            ClassPriors::new(0.5, 0.2, 0.2),
            Err(Error::InvalidDistribution(_))
        ));
        assert!(ClassPriors::new(1.2, -0.1, -0.1).is_err());
    }

    #[test]
    fn degenerate_prior_gives_all_o() {
        let p = ClassPriors::new(1.0, 0.0, 0.0).unwrap();
        let out = random_sequences(&[("a", 500)], &p, 1).unwrap();
        assert!(out[0].labels.iter().all(|&l| l == Label::O));
    }

    #[test]
    fn same_seed_same_output_regardless_of_order() {
        let p = ClassPriors::new(0.845, 0.047, 0.108).unwrap();
        let a = random_sequences(&[("x", 30), ("y", 40)], &p, 7).unwrap();
        let b = random_sequences(&[("y", 40), ("x", 30)], &p, 7).unwrap();
        assert_eq!(a[0], b[1]);
        assert_eq!(a[1], b[0]);
        let c = random_sequences(&[("x", 30)], &p, 8).unwrap();
        assert_ne!(a[0], c[0]);
    }

    #[test]
    fn frequencies_follow_priors() {
        let p = ClassPriors::new(0.845, 0.047, 0.108).unwrap();
        let ids: Vec<String> = (0..1000).map(|i| format!("t{i}")).collect();
        let shapes: Vec<(&str, usize)> = ids.iter().map(|s| (s.as_str(), 1000)).collect();
        let out = random_sequences(&shapes, &p, 3).unwrap();
        let freq = ClassPriors::from_sequences(&out).unwrap();
        for l in Label::ALL {
            assert!((freq.get(l) - p.get(l)).abs() < 0.005, "{l}: {}", freq.get(l));
        }
    }

    #[test]
    fn empty_input_gives_empty_output() {
        assert!(majority_baseline(&[]).is_empty());
        let p = ClassPriors::new(1.0, 0.0, 0.0).unwrap();
        assert!(random_baseline(&[], &p, 0).unwrap().is_empty());
    }
}
