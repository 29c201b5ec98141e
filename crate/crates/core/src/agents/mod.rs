//! Off-policy actor-critic learners: DDPG with additive Gaussian exploration
//! and SAC with a tanh-squashed Gaussian policy and twin critics.

mod ddpg;
mod sac;

use std::fmt;
use std::str::FromStr;

use ndarray::{concatenate, Array1, Array2, ArrayView2, Axis};

pub use ddpg::{ddpg_target_value, DdpgAgent};
pub use sac::{sac_target_value, squashed_log_prob, SacAgent, SacSample, LOG_STD_HARD_MAX, LOG_STD_HARD_MIN};

use crate::an2n::{Exploration, NoiseMode};
use crate::envs::EnvSpec;
use crate::error::{Error, Result};
use crate::replay::Transition;
use crate::rng::RunRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algo {
    Ddpg,
    Sac,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Ddpg => "ddpg",
            Algo::Sac => "sac",
        }
    }

    pub fn noise_mode(self) -> NoiseMode {
        match self {
            Algo::Ddpg => NoiseMode::Additive,
            Algo::Sac => NoiseMode::VarianceScale,
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ddpg" => Ok(Algo::Ddpg),
            "sac" => Ok(Algo::Sac),
            other => Err(Error::Config {
                key: "algo".into(),
                reason: format!("unknown algorithm `{other}` (expected ddpg or sac)"),
            }),
        }
    }
}

/// Hyperparameters shared by both learners.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub gamma: f64,
    pub tau: f64,
    pub hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// SAC entropy temperature.
    pub alpha: f64,
    pub log_std_min: f64,
    pub log_std_max: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            gamma: 0.99,
            tau: 0.005,
            hidden: vec![64, 64],
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            alpha: 0.2,
            log_std_min: -20.0,
            log_std_max: 2.0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::invalid("gamma", format!("{} is outside [0, 1]", self.gamma)));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::invalid("tau", format!("{} is outside (0, 1]", self.tau)));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::invalid("hidden", "need at least one positive width"));
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return Err(Error::invalid("learning rate", "must be positive"));
        }
        if self.alpha.is_nan() || self.alpha < 0.0 {
            return Err(Error::invalid("alpha", "must be non-negative"));
        }
        if !(LOG_STD_HARD_MIN <= self.log_std_min
            && self.log_std_min <= self.log_std_max
            && self.log_std_max <= LOG_STD_HARD_MAX)
        {
            return Err(Error::invalid(
                "log-std range",
                format!(
                    "need {LOG_STD_HARD_MIN} ≤ min ≤ max ≤ {LOG_STD_HARD_MAX}, got [{}, {}]",
                    self.log_std_min, self.log_std_max
                ),
            ));
        }
        Ok(())
    }
}

/// A minibatch laid out as matrices, one row per transition.
#[derive(Debug, Clone)]
pub struct Batch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_states: Array2<f64>,
    /// 1 for a true terminal, 0 otherwise.
    pub dones: Array1<f64>,
}

impl Batch {
    pub fn from_transitions(ts: &[&Transition]) -> Result<Self> {
        let first = ts.first().ok_or(Error::EmptyBuffer)?;
        let (sd, ad) = (first.state.len(), first.action.len());
        let n = ts.len();
        let mut states = Array2::zeros((n, sd));
        let mut actions = Array2::zeros((n, ad));
        let mut next_states = Array2::zeros((n, sd));
        let mut rewards = Array1::zeros(n);
        let mut dones = Array1::zeros(n);
        for (i, t) in ts.iter().enumerate() {
            if t.state.len() != sd || t.next_state.len() != sd {
                return Err(Error::shape("batch state", sd, t.state.len()));
            }
            if t.action.len() != ad {
                return Err(Error::shape("batch action", ad, t.action.len()));
            }
            states.row_mut(i).assign(&ndarray::ArrayView1::from(&t.state[..]));
            actions.row_mut(i).assign(&ndarray::ArrayView1::from(&t.action[..]));
            next_states.row_mut(i).assign(&ndarray::ArrayView1::from(&t.next_state[..]));
            rewards[i] = t.reward;
            dones[i] = if t.done { 1.0 } else { 0.0 };
        }
        Ok(Batch { states, actions, rewards, next_states, dones })
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

pub(crate) fn state_action(states: ArrayView2<f64>, actions: ArrayView2<f64>) -> Array2<f64> {
    concatenate![Axis(1), states, actions]
}

pub(crate) fn finite_or_err(value: f64, context: &'static str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { context, detail: format!("value {value}") })
    }
}

/// Losses reported by one gradient update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    /// Mean squared TD error (averaged over both critics for SAC).
    pub critic_loss: f64,
    pub actor_objective: f64,
}

/// Either learner behind one interface for the training loop.
#[derive(Debug, Clone)]
pub enum Agent {
    Ddpg(DdpgAgent),
    Sac(SacAgent),
}

impl Agent {
    pub fn new(algo: Algo, spec: &EnvSpec, cfg: &AgentConfig, rng: &mut RunRng) -> Result<Self> {
        Ok(match algo {
            Algo::Ddpg => Agent::Ddpg(DdpgAgent::new(spec, cfg, rng)?),
            Algo::Sac => Agent::Sac(SacAgent::new(spec, cfg, rng)?),
        })
    }

    pub fn algo(&self) -> Algo {
        match self {
            Agent::Ddpg(_) => Algo::Ddpg,
            Agent::Sac(_) => Algo::Sac,
        }
    }

    /// Exploratory action. Additive noise is given as a fraction of the
    /// action bound.
    pub fn explore(&self, state: &[f64], exploration: Exploration, rng: &mut RunRng) -> Result<Vec<f64>> {
        match (self, exploration) {
            (Agent::Ddpg(a), Exploration::Additive(frac)) => a.act(state, frac * a.action_bound(), rng),
            (Agent::Sac(a), Exploration::VarianceScale(scale)) => Ok(a.act(state, scale, rng, false)?.action),
            (agent, e) => Err(Error::invalid("exploration", format!("{e:?} does not apply to {}", agent.algo()))),
        }
    }

    /// Noise-free action used for evaluation.
    pub fn act_deterministic(&self, state: &[f64]) -> Result<Vec<f64>> {
        match self {
            Agent::Ddpg(a) => a.policy(state),
            Agent::Sac(a) => a.mean_action(state),
        }
    }

    pub fn update(&mut self, batch: &Batch, rng: &mut RunRng) -> Result<UpdateStats> {
        match self {
            Agent::Ddpg(a) => a.update(batch),
            Agent::Sac(a) => {
                let (l1, l2, obj) = a.update(batch, rng)?;
                Ok(UpdateStats { critic_loss: 0.5 * (l1 + l2), actor_objective: obj })
            }
        }
    }

    /// Target-critic value of the policy's action at `state`, used to
    /// bootstrap returns of truncated rollouts.
    pub fn bootstrap_value(&self, state: &[f64]) -> Result<f64> {
        match self {
            Agent::Ddpg(a) => a.bootstrap_value(state),
            Agent::Sac(a) => a.bootstrap_value(state),
        }
    }
}
