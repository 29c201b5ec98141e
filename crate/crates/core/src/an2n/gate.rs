use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use super::similarity::{RunningMean, SimilarityMetric};
use crate::error::{Error, Result};
use crate::replay::KeyStateQueue;

/// Similarity metric plus the adaptive threshold that decides "key".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityConfig {
    pub metric: SimilarityMetric,
    pub threshold: f64,
    /// Proportional gain of the threshold controller.
    pub eta: f64,
    pub min_threshold: f64,
    pub max_threshold: f64,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        SimilarityConfig {
            metric: SimilarityMetric::Cosine,
            threshold: 0.95,
            eta: 0.05,
            min_threshold: 0.5,
            max_threshold: 0.999,
        }
    }
}

impl SimilarityConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_threshold.partial_cmp(&self.max_threshold).is_none_or(|o| o.is_gt()) {
            return Err(Error::invalid(
                "similarity clamps",
                format!("min {} exceeds max {}", self.min_threshold, self.max_threshold),
            ));
        }
        if !(self.min_threshold..=self.max_threshold).contains(&self.threshold) {
            return Err(Error::invalid(
                "similarity threshold",
                format!("{} outside [{}, {}]", self.threshold, self.min_threshold, self.max_threshold),
            ));
        }
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(Error::invalid("eta", format!("{} must be non-negative", self.eta)));
        }
        Ok(())
    }
}

/// `threshold ← clamp(threshold + η·(observed − target), min, max)`.
///
/// Too many key states raise the bar; too few lower it.
pub fn adapt_threshold(cfg: &SimilarityConfig, observed: f64, target: f64) -> SimilarityConfig {
    let threshold = (cfg.threshold + cfg.eta * (observed - target)).clamp(cfg.min_threshold, cfg.max_threshold);
    SimilarityConfig { threshold, ..*cfg }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateDecision {
    /// Highest similarity to any queued state; `-∞` for an empty queue.
    pub best: f64,
    pub threshold: f64,
    pub is_key: bool,
    pub metric: SimilarityMetric,
}

/// Compare `state` with every queued key state and flag it as key when the
/// closest one reaches the threshold.
pub fn gate(state: &[f64], queue: &KeyStateQueue, cfg: &SimilarityConfig, center: &[f64]) -> Result<GateDecision> {
    let mut best = f64::NEG_INFINITY;
    for entry in queue.iter() {
        best = best.max(cfg.metric.similarity(state, &entry.state, center)?);
    }
    Ok(GateDecision {
        best,
        threshold: cfg.threshold,
        is_key: !queue.is_empty() && best >= cfg.threshold,
        metric: cfg.metric,
    })
}

/// Fraction of key decisions over the most recent gate calls.
#[derive(Debug, Clone)]
pub struct KeyFractionWindow {
    flags: VecDeque<bool>,
    capacity: usize,
    keys: usize,
}

impl KeyFractionWindow {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("window", "must be positive"));
        }
        Ok(KeyFractionWindow { flags: VecDeque::with_capacity(capacity), capacity, keys: 0 })
    }

    pub fn push(&mut self, is_key: bool) {
        if self.flags.len() == self.capacity && self.flags.pop_front() == Some(true) {
            self.keys -= 1;
        }
        self.flags.push_back(is_key);
        self.keys += usize::from(is_key);
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    /// 0 before any call has been recorded.
    pub fn fraction(&self) -> f64 {
        if self.flags.is_empty() {
            0.0
        } else {
            self.keys as f64 / self.flags.len() as f64
        }
    }
}

/// Target share of big-noise steps, decaying linearly from `start` to `end`
/// over `total_steps` and constant afterwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PctAddSchedule {
    pub start: f64,
    pub end: f64,
    pub total_steps: u64,
}

impl PctAddSchedule {
    pub fn new(start: f64, end: f64, total_steps: u64) -> Result<Self> {
        if !((0.0..=1.0).contains(&start) && (0.0..=1.0).contains(&end) && start >= end) {
            return Err(Error::invalid("pct_add schedule", format!("need 1 ≥ start ≥ end ≥ 0, got {start} → {end}")));
        }
        Ok(PctAddSchedule { start, end, total_steps })
    }

    pub fn at(&self, step: u64) -> f64 {
        if self.total_steps == 0 || step >= self.total_steps {
            return self.end;
        }
        let frac = step as f64 / self.total_steps as f64;
        self.start + (self.end - self.start) * frac
    }
}

impl Default for PctAddSchedule {
    fn default() -> Self {
        PctAddSchedule { start: 0.4, end: 0.2, total_steps: 50_000 }
    }
}

pub fn pct_add_at(step: u64, schedule: &PctAddSchedule) -> f64 {
    schedule.at(step)
}

/// Which point the cosine metric centers states on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Centering {
    /// Mean of every interaction state seen so far.
    Running,
    /// Mean of the states currently in the key queue.
    Queue,
    /// No centering.
    Zero,
}

impl Centering {
    pub fn name(self) -> &'static str {
        match self {
            Centering::Running => "running",
            Centering::Queue => "queue",
            Centering::Zero => "zero",
        }
    }
}

impl fmt::Display for Centering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Centering {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "running" => Ok(Centering::Running),
            "queue" => Ok(Centering::Queue),
            "zero" => Ok(Centering::Zero),
            other => Err(Error::Config {
                key: "centering".into(),
                reason: format!("unknown centering `{other}` (expected running, queue or zero)"),
            }),
        }
    }
}

/// The gate together with the state it carries through a run: the running
/// state mean, the recent key fraction, and the threshold controller.
///
/// The controller is stepped once per gate call with that call's key
/// indicator, which drives the long-run key fraction to the scheduled
/// target. Calls against an empty queue are neither recorded nor adapted on.
#[derive(Debug, Clone)]
pub struct KeyStateGate {
    config: SimilarityConfig,
    centering: Centering,
    mean: RunningMean,
    window: KeyFractionWindow,
    schedule: PctAddSchedule,
}

impl KeyStateGate {
    pub fn new(
        config: SimilarityConfig,
        centering: Centering,
        state_dim: usize,
        window: usize,
        schedule: PctAddSchedule,
    ) -> Result<Self> {
        config.validate()?;
        Ok(KeyStateGate {
            config,
            centering,
            mean: RunningMean::new(state_dim),
            window: KeyFractionWindow::new(window)?,
            schedule,
        })
    }

    pub fn config(&self) -> &SimilarityConfig {
        &self.config
    }

    pub fn threshold(&self) -> f64 {
        self.config.threshold
    }

    pub fn window_fraction(&self) -> f64 {
        self.window.fraction()
    }

    pub fn running_mean(&self) -> &RunningMean {
        &self.mean
    }

    /// Fold a visited state into the running mean.
    pub fn observe(&mut self, state: &[f64]) -> Result<()> {
        self.mean.update(state)
    }

    fn center(&self, queue: &KeyStateQueue) -> Vec<f64> {
        let dim = self.mean.mean().len();
        match self.centering {
            Centering::Running => self.mean.mean().to_vec(),
            Centering::Zero => vec![0.0; dim],
            Centering::Queue => {
                let mut c = vec![0.0; dim];
                for e in queue.iter() {
                    for (ci, v) in c.iter_mut().zip(&e.state) {
                        *ci += v;
                    }
                }
                let n = queue.len().max(1) as f64;
                c.iter_mut().for_each(|v| *v /= n);
                c
            }
        }
    }

    /// Gate `state` at training step `step` and update the controller.
    pub fn decide(&mut self, state: &[f64], queue: &KeyStateQueue, step: u64) -> Result<GateDecision> {
        let center = self.center(queue);
        let decision = gate(state, queue, &self.config, &center)?;
        if !queue.is_empty() {
            self.window.push(decision.is_key);
            let indicator = if decision.is_key { 1.0 } else { 0.0 };
            self.config = adapt_threshold(&self.config, indicator, self.schedule.at(step));
        }
        Ok(decision)
    }
}
