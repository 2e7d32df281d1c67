//! Multinomial softmax classifier with cross-entropy or focal loss.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tfidf::SparseVector;
use crate::error::{Error, Result};

/// `-a_t (1 - p)^gamma ln p` for the probability `p` of the true class.
pub fn focal_loss(p: f64, a_t: f64, gamma: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Domain(format!("focal loss needs p in (0, 1], got {p}")));
    }
    Ok(focal_from_log(p.ln(), a_t, gamma))
}

fn focal_from_log(log_p: f64, a_t: f64, gamma: f64) -> f64 {
    let q = -log_p.exp_m1();
    let scale = if gamma == 0.0 { 1.0 } else { q.powf(gamma) };
    -a_t * scale * log_p
}

/// Factor `f` such that the focal-loss gradient with respect to logit `k`
/// is `f * (p_k - [k = t])`.
fn focal_logit_factor(log_p: f64, a_t: f64, gamma: f64) -> f64 {
    let p = log_p.exp();
    let q = -log_p.exp_m1();
    let (scale, slope) = if gamma == 0.0 {
        (1.0, 0.0)
    } else if q == 0.0 {
        (0.0, 0.0)
    } else {
        (q.powf(gamma), gamma * q.powf(gamma - 1.0) * p * log_p)
    };
    a_t * (scale - slope)
}

/// `sqrt(1 / p_t)` per class from training-class frequencies; classes that
/// never occur get weight 1.
pub fn focal_alpha(class_freqs: &[f64]) -> Vec<f64> {
    class_freqs
        .iter()
        .map(|&p| if p > 0.0 { (1.0 / p).sqrt() } else { 1.0 })
        .collect()
}

/// Relative class frequencies of `targets`.
pub fn class_frequencies(targets: &[usize], n_classes: usize) -> Vec<f64> {
    let mut counts = vec![0.0; n_classes];
    for &t in targets {
        counts[t] += 1.0;
    }
    let n = targets.len().max(1) as f64;
    counts.iter().map(|c| c / n).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LossKind {
    CrossEntropy,
    Focal { gamma: f64, alpha: Vec<f64> },
}

impl LossKind {
    fn value_and_factor(&self, log_p: f64, target: usize) -> (f64, f64) {
        match self {
            LossKind::CrossEntropy => (-log_p, 1.0),
            LossKind::Focal { gamma, alpha } => {
                let a = alpha.get(target).copied().unwrap_or(1.0);
                (focal_from_log(log_p, a, *gamma), focal_logit_factor(log_p, a, *gamma))
            }
        }
    }
}

/// Mini-batch Adam settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// `usize::MAX` trains full-batch.
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Coefficient of `0.5 * l2 * |W|^2`; biases are not penalized.
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 64,
            learning_rate: 0.05,
            l2: 1e-4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidParameter("epochs and batch size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!("learning rate {}", self.learning_rate)));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::InvalidParameter(format!("l2 penalty {}", self.l2)));
        }
        Ok(())
    }
}

/// Softmax over `classes x features` weights plus a bias per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    n_classes: usize,
    n_features: usize,
    /// Row-major, one row per class.
    weights: Vec<f64>,
    bias: Vec<f64>,
    loss: LossKind,
}

fn log_softmax(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    for z in logits {
        *z -= lse;
    }
}

impl LinearModel {
    pub fn zeros(n_classes: usize, n_features: usize, loss: LossKind) -> Self {
        Self {
            n_classes,
            n_features,
            weights: vec![0.0; n_classes * n_features],
            bias: vec![0.0; n_classes],
            loss,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn loss(&self) -> &LossKind {
        &self.loss
    }

    pub fn weight(&self, class: usize, feature: usize) -> f64 {
        self.weights[class * self.n_features + feature]
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Weights followed by biases.
    pub fn parameters(&self) -> Vec<f64> {
        self.weights.iter().chain(&self.bias).copied().collect()
    }

    pub fn set_parameters(&mut self, params: &[f64]) {
        let nw = self.weights.len();
        self.weights.copy_from_slice(&params[..nw]);
        self.bias.copy_from_slice(&params[nw..]);
    }

    fn log_proba_into(&self, x: &SparseVector, out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            let row = &self.weights[k * self.n_features..(k + 1) * self.n_features];
            *o = self.bias[k] + x.dot_dense(row);
        }
        log_softmax(out);
    }

    pub fn predict_proba(&self, x: &SparseVector) -> Vec<f64> {
        let mut out = vec![0.0; self.n_classes];
        self.log_proba_into(x, &mut out);
        out.iter().map(|l| l.exp()).collect()
    }

    /// Most probable class; ties go to the lowest index.
    pub fn predict(&self, x: &SparseVector) -> usize {
        let mut out = vec![0.0; self.n_classes];
        self.log_proba_into(x, &mut out);
        let mut best = 0;
        for k in 1..self.n_classes {
            if out[k] > out[best] {
                best = k;
            }
        }
        best
    }

    /// Mean loss over `rows` plus the L2 penalty, and its gradient in the
    /// layout of [`LinearModel::parameters`].
    pub fn objective_and_gradient(&self, rows: &[&SparseVector], targets: &[usize], l2: f64) -> (f64, Vec<f64>) {
        let nf = self.n_features;
        let nw = self.weights.len();
        let mut grad = vec![0.0; nw + self.n_classes];
        let mut logp = vec![0.0; self.n_classes];
        let mut loss = 0.0;
        for (x, &t) in rows.iter().zip(targets) {
            self.log_proba_into(x, &mut logp);
            let (value, factor) = self.loss.value_and_factor(logp[t], t);
            loss += value;
            for k in 0..self.n_classes {
                let indicator = if k == t { 1.0 } else { 0.0 };
                let g = factor * (logp[k].exp() - indicator);
                if g == 0.0 {
                    continue;
                }
                grad[nw + k] += g;
                let row = &mut grad[k * nf..(k + 1) * nf];
                for &(i, v) in x.entries() {
                    row[i] += g * v;
                }
            }
        }
        let n = rows.len().max(1) as f64;
        loss /= n;
        for g in &mut grad {
            *g /= n;
        }
        if l2 > 0.0 {
            loss += 0.5 * l2 * self.weights.iter().map(|w| w * w).sum::<f64>();
            for (g, w) in grad[..nw].iter_mut().zip(&self.weights) {
                *g += l2 * w;
            }
        }
        (loss, grad)
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

/// Trains from zero weights with Adam on shuffled mini-batches.
pub fn train_linear(
    rows: &[SparseVector],
    targets: &[usize],
    n_features: usize,
    n_classes: usize,
    loss: LossKind,
    config: &TrainConfig,
) -> Result<LinearModel> {
    config.validate()?;
    if rows.len() != targets.len() {
        return Err(Error::Alignment(format!(
            "{} feature rows vs {} targets",
            rows.len(),
            targets.len()
        )));
    }
    if rows.is_empty() {
        return Err(Error::InsufficientData("no training examples".into()));
    }
    if n_classes < 2 {
        return Err(Error::InvalidParameter("need at least two classes".into()));
    }
    if let Some(&t) = targets.iter().find(|&&t| t >= n_classes) {
        return Err(Error::InvalidParameter(format!("target class {t} out of range")));
    }
    if let Some(i) = rows
        .iter()
        .flat_map(|r| r.entries())
        .map(|e| e.0)
        .find(|&i| i >= n_features)
    {
        return Err(Error::InvalidParameter(format!("feature index {i} out of range")));
    }
    if let LossKind::Focal { gamma, alpha } = &loss {
        if !(*gamma >= 0.0 && gamma.is_finite()) || alpha.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::InvalidParameter(
                "focal loss needs gamma >= 0 and positive weights".into(),
            ));
        }
    }

    let mut model = LinearModel::zeros(n_classes, n_features, loss);
    let mut params = model.parameters();
    let mut adam = Adam::new(params.len());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let batch = config.batch_size.min(rows.len());

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let xs: Vec<&SparseVector> = chunk.iter().map(|&i| &rows[i]).collect();
            let ts: Vec<usize> = chunk.iter().map(|&i| targets[i]).collect();
            let (l, g) = model.objective_and_gradient(&xs, &ts, config.l2);
            if !l.is_finite() || g.iter().any(|v| !v.is_finite()) {
                return Err(Error::TrainingDiverged { epoch, loss: l });
            }
            epoch_loss += l * chunk.len() as f64;
            adam.step(&mut params, &g, config.learning_rate);
            model.set_parameters(&params);
        }
        log::debug!("epoch {epoch}: mean loss {:.6}", epoch_loss / rows.len() as f64);
    }
    Ok(model)
}
