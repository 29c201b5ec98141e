//! Small deterministic continuous-control tasks.
//!
//! Each environment keeps its physical state privately and exposes an
//! observation vector. Dynamics are pure functions of (physical state,
//! action), so identical inputs give bit-identical steps.

mod cliff;
mod mountain_car;
mod pendulum;

use std::fmt;
use std::str::FromStr;

pub use cliff::{linf_distance_to_strip, CliffField, CliffState};
pub use mountain_car::{MountainCar, MountainCarState};
pub use pendulum::{wrap_angle, Pendulum, PendulumState};

use crate::error::{Error, Result};
use crate::rng::RunRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvSpec {
    pub state_dim: usize,
    pub action_dim: usize,
    /// Symmetric bound applied to every action component.
    pub action_bound: f64,
    pub max_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_state: Vec<f64>,
    pub reward: f64,
    /// Episode over, either by reaching a terminal state or the step limit.
    pub done: bool,
    /// A true terminal state. Bootstrapping stops here but not at the step
    /// limit.
    pub terminal: bool,
}

pub trait Environment: Send {
    fn kind(&self) -> EnvKind;

    fn spec(&self) -> EnvSpec;

    /// Start a new episode and return the first observation.
    fn reset(&mut self, rng: &mut RunRng) -> Vec<f64>;

    /// Advance one step. Actions are clamped to the bound; NaN or infinite
    /// components are rejected.
    fn step(&mut self, action: &[f64]) -> Result<StepResult>;

    /// Steps taken since the last reset.
    fn elapsed(&self) -> usize;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EnvKind {
    Pendulum,
    MountainCar,
    Cliff,
}

impl EnvKind {
    pub const ALL: [EnvKind; 3] = [EnvKind::Pendulum, EnvKind::MountainCar, EnvKind::Cliff];

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Pendulum => "pendulum",
            EnvKind::MountainCar => "mcc",
            EnvKind::Cliff => "cliff",
        }
    }

    pub fn make(self) -> Box<dyn Environment> {
        match self {
            EnvKind::Pendulum => Box::new(Pendulum::default()),
            EnvKind::MountainCar => Box::new(MountainCar::default()),
            EnvKind::Cliff => Box::new(CliffField::default()),
        }
    }

    pub fn spec(self) -> EnvSpec {
        match self {
            EnvKind::Pendulum => Pendulum::SPEC,
            EnvKind::MountainCar => MountainCar::SPEC,
            EnvKind::Cliff => CliffField::SPEC,
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EnvKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| Error::Config {
            key: "env".into(),
            reason: format!("unknown environment `{s}` (expected pendulum, mcc or cliff)"),
        })
    }
}

/// Validate an action and clamp it into `±bound`.
pub(crate) fn clamp_action(action: &[f64], spec: &EnvSpec) -> Result<Vec<f64>> {
    if action.len() != spec.action_dim {
        return Err(Error::shape("action", spec.action_dim, action.len()));
    }
    if let Some(v) = action.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite { context: "action", detail: format!("component {v}") });
    }
    Ok(action.iter().map(|a| a.clamp(-spec.action_bound, spec.action_bound)).collect())
}
