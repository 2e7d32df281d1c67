//! Bayesian online change-point detection over daily post counts.
//!
//! Counts are modelled as Poisson with a Gamma prior on the rate, so the
//! one-step predictive of a run is Negative Binomial. The run length `r_t`
//! at day `t` is the number of days since the current segment began: the
//! first day always opens a segment (`r_0 = 0`), and at every later day the
//! segment either grows or a new one starts with probability `hazard`.
//!
//! ```text
//! P(r_t = r+1, x_0..t) = P(r_{t-1} = r, x_0..t-1) · (1 - H) · NB(x_t | α_r, β_r)
//! P(r_t = 0,   x_0..t) = Σ_r P(r_{t-1} = r, x_0..t-1) · H · NB(x_t | α_0, β_0)
//! ```
//!
//! All masses are kept in log space and renormalised every step; run lengths
//! whose posterior mass drops below [`TRUNCATION_MASS`] are pruned.

use chrono::{Days, NaiveDate};
use libm::lgamma as ln_gamma;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Posterior mass below which a run-length hypothesis is discarded.
pub const TRUNCATION_MASS: f64 = 1e-12;

/// Posts per calendar day for one user, zero-filled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountSeries {
    pub user_id: String,
    pub start_date: NaiveDate,
    pub counts: Vec<u32>,
}

impl CountSeries {
    pub fn date_of(&self, day: usize) -> NaiveDate {
        self.start_date + Days::new(day as u64)
    }
}

/// Gamma prior over the Poisson rate (shape/rate parameterisation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaParams {
    shape: f64,
    rate: f64,
}

impl GammaParams {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite() && rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma prior needs shape > 0 and rate > 0, got ({shape}, {rate})"
            )));
        }
        Ok(Self { shape, rate })
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Conjugate update after observing one day with `x` posts.
    fn observe(self, x: u32) -> Self {
        Self {
            shape: self.shape + x as f64,
            rate: self.rate + 1.0,
        }
    }

    fn ln_predictive(&self, x: u32) -> f64 {
        let (a, b) = (self.shape, self.rate);
        let x = x as f64;
        ln_gamma(x + a) - ln_gamma(a) - ln_gamma(x + 1.0) + a * (b / (b + 1.0)).ln() - x * (b + 1.0).ln()
    }
}

impl Default for GammaParams {
    fn default() -> Self {
        Self { shape: 1.0, rate: 1.0 }
    }
}

/// Negative Binomial predictive mass of `x` under a Gamma-Poisson model.
pub fn poisson_gamma_predictive(params: GammaParams, x: u32) -> Result<f64> {
    let p = params.ln_predictive(x).exp();
    if !p.is_finite() || p <= 0.0 {
        return Err(Error::Numerical(format!(
            "predictive mass of {x} under {params:?} is {p}"
        )));
    }
    Ok(p)
}

/// Run-length distributions for every day of a series.
///
/// Each step stores the surviving `(run_length, probability)` pairs in
/// ascending run-length order.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLengthPosterior {
    pub start_date: NaiveDate,
    steps: Vec<Vec<(usize, f64)>>,
}

impl RunLengthPosterior {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Sparse distribution at day `t`.
    pub fn step(&self, t: usize) -> &[(usize, f64)] {
        &self.steps[t]
    }

    /// Dense distribution over run lengths `0..=t`.
    pub fn dense(&self, t: usize) -> Vec<f64> {
        let mut out = vec![0.0; t + 1];
        for &(r, p) in &self.steps[t] {
            out[r] = p;
        }
        out
    }

    /// Most probable run length at day `t` (smallest on ties).
    pub fn map_run_length(&self, t: usize) -> usize {
        self.steps[t]
            .iter()
            .fold(
                (0, f64::NEG_INFINITY),
                |best, &(r, p)| if p > best.1 { (r, p) } else { best },
            )
            .0
    }

    /// `P(r_t <= max_run)`.
    pub fn mass_at_most(&self, t: usize, max_run: usize) -> f64 {
        self.steps[t]
            .iter()
            .take_while(|(r, _)| *r <= max_run)
            .map(|(_, p)| p)
            .sum()
    }
}

struct Hypothesis {
    run_length: usize,
    ln_mass: f64,
    params: GammaParams,
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Runs the run-length recursion over the whole series.
pub fn run_bocpd(series: &CountSeries, prior: GammaParams, hazard: f64) -> Result<RunLengthPosterior> {
    if !(hazard > 0.0 && hazard < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "hazard must lie in (0, 1), got {hazard}"
        )));
    }
    if series.counts.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "count series for {} is empty",
            series.user_id
        )));
    }
    let ln_h = hazard.ln();
    let ln_1mh = (-hazard).ln_1p();
    let mut hyps: Vec<Hypothesis> = Vec::new();
    let mut steps = Vec::with_capacity(series.counts.len());

    for (t, &x) in series.counts.iter().enumerate() {
        let ln_new_segment = prior.ln_predictive(x);
        let mut next = Vec::with_capacity(hyps.len() + 1);
        // Previous masses are normalised, so the change branch sums to H.
        next.push(Hypothesis {
            run_length: 0,
            ln_mass: if t == 0 { ln_new_segment } else { ln_h + ln_new_segment },
            params: prior.observe(x),
        });
        next.extend(hyps.iter().map(|h| Hypothesis {
            run_length: h.run_length + 1,
            ln_mass: h.ln_mass + ln_1mh + h.params.ln_predictive(x),
            params: h.params.observe(x),
        }));

        let ln_norm = log_sum_exp(next.iter().map(|h| h.ln_mass));
        if !ln_norm.is_finite() {
            return Err(Error::Numerical(format!(
                "run-length mass vanished at day {t} for {}",
                series.user_id
            )));
        }
        for h in &mut next {
            h.ln_mass -= ln_norm;
        }
        let ln_cutoff = TRUNCATION_MASS.ln();
        next.retain(|h| h.ln_mass >= ln_cutoff);
        let ln_kept = log_sum_exp(next.iter().map(|h| h.ln_mass));
        for h in &mut next {
            h.ln_mass -= ln_kept;
        }

        steps.push(next.iter().map(|h| (h.run_length, h.ln_mass.exp())).collect());
        hyps = next;
    }

    Ok(RunLengthPosterior {
        start_date: series.start_date,
        steps,
    })
}

/// A day on which the run length collapsed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangePoint {
    pub date: NaiveDate,
    pub day_index: usize,
    pub posterior_mass: f64,
}

/// Rule turning a run-length posterior into discrete change points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeclarationRule {
    /// Run lengths up to this value count as "recently reset".
    pub r_reset: usize,
    /// Declare when `P(r_t <= r_reset)` exceeds this.
    pub mass_threshold: f64,
    /// Minimum spacing between declarations, in days.
    pub min_gap_days: usize,
}

impl Default for DeclarationRule {
    fn default() -> Self {
        Self {
            r_reset: 2,
            mass_threshold: 0.5,
            min_gap_days: 7,
        }
    }
}

impl DeclarationRule {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass_threshold > 0.0 && self.mass_threshold < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "mass threshold must lie in (0, 1), got {}",
                self.mass_threshold
            )));
        }
        Ok(())
    }
}

/// Declares day `t` a change point when `P(r_t <= r_reset)` rises above the
/// threshold (it did not exceed it on day `t - 1`) and at least
/// `min_gap_days` have passed since the previous declaration.
///
/// Days `t <= r_reset` are skipped: their run length cannot exceed `t`, so
/// the condition holds trivially there. Only the first day of a run of
/// above-threshold days is a candidate, so one collapse of the run length
/// yields at most one declaration.
pub fn declare_changepoints(posterior: &RunLengthPosterior, rule: &DeclarationRule) -> Vec<ChangePoint> {
    let mut out: Vec<ChangePoint> = Vec::new();
    let mut above_yesterday = false;
    for t in (rule.r_reset + 1)..posterior.len() {
        let mass = posterior.mass_at_most(t, rule.r_reset);
        let above = mass > rule.mass_threshold;
        let rising = above && !above_yesterday;
        above_yesterday = above;
        if !rising {
            continue;
        }
        if let Some(prev) = out.last() {
            if t - prev.day_index < rule.min_gap_days {
                continue;
            }
        }
        out.push(ChangePoint {
            date: posterior.start_date + Days::new(t as u64),
            day_index: t,
            posterior_mass: mass,
        });
    }
    out
}

/// All detector hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub prior: GammaParams,
    pub hazard: f64,
    pub rule: DeclarationRule,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            prior: GammaParams::default(),
            hazard: 0.01,
            rule: DeclarationRule::default(),
        }
    }
}

/// Runs the recursion and the declaration rule on one series.
pub fn detect(series: &CountSeries, config: &DetectorConfig) -> Result<Vec<ChangePoint>> {
    config.rule.validate()?;
    let posterior = run_bocpd(series, config.prior, config.hazard)?;
    Ok(declare_changepoints(&posterior, &config.rule))
}
