use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::agents::{AgentConfig, Algo};
use crate::an2n::{Centering, NoiseTier, PctAddSchedule, SimilarityConfig, SimilarityMetric};
use crate::envs::EnvKind;
use crate::error::{Error, Result};

/// How the clip-formula count is used each epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueueSizing {
    /// The count is how many states are admitted; the queue keeps its
    /// maximum capacity.
    Fixed,
    /// The count also becomes the queue's capacity.
    Adaptive,
}

impl QueueSizing {
    pub fn name(self) -> &'static str {
        match self {
            QueueSizing::Fixed => "fixed",
            QueueSizing::Adaptive => "adaptive",
        }
    }
}

impl FromStr for QueueSizing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(QueueSizing::Fixed),
            "adaptive" => Ok(QueueSizing::Adaptive),
            other => Err(Error::Config {
                key: "queue_sizing".into(),
                reason: format!("unknown sizing `{other}` (expected fixed or adaptive)"),
            }),
        }
    }
}

/// Everything one training run needs. Parsed from flat `key = value` text;
/// see [`RunConfig::KEYS`] for the accepted keys.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Defaults to `<env>-<algo>[-an2n]-s<seed>`.
    pub run_id: Option<String>,
    pub env: EnvKind,
    pub algo: Algo,
    pub an2n: bool,
    pub seed: u64,
    pub total_steps: u64,
    pub epoch_steps: u64,
    pub eval_episodes: usize,
    pub warmup_steps: u64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub update_every: u64,
    pub agent: AgentConfig,
    pub noise: NoiseTier,
    pub similarity: SimilarityConfig,
    pub centering: Centering,
    pub key_window: usize,
    pub pct_add_start: f64,
    pub pct_add_end: f64,
    /// Steps over which the target key fraction decays; defaults to
    /// `total_steps`.
    pub pct_add_steps: Option<u64>,
    pub k_lower: usize,
    pub k_upper: usize,
    pub queue_sizing: QueueSizing,
    /// Record real elapsed time in `wall_ms`. Off by default so metrics are
    /// byte-for-byte reproducible.
    pub wall_clock: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            run_id: None,
            env: EnvKind::Pendulum,
            algo: Algo::Ddpg,
            an2n: true,
            seed: 0,
            total_steps: 50_000,
            epoch_steps: 2_000,
            eval_episodes: 10,
            warmup_steps: 1_000,
            batch_size: 128,
            buffer_capacity: 1_000_000,
            update_every: 1,
            agent: AgentConfig::default(),
            noise: NoiseTier::default(),
            similarity: SimilarityConfig::default(),
            centering: Centering::Running,
            key_window: 1_000,
            pct_add_start: 0.4,
            pct_add_end: 0.2,
            pct_add_steps: None,
            k_lower: 5,
            k_upper: 20,
            queue_sizing: QueueSizing::Fixed,
            wall_clock: false,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| Error::Config { key: key.into(), reason: format!("cannot parse `{value}`: {e}") })
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config { key: key.into(), reason: format!("expected on/off, got `{value}`") }),
    }
}

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

impl RunConfig {
    pub const KEYS: &'static [&'static str] = &[
        "run_id",
        "env",
        "algo",
        "an2n",
        "seed",
        "total_steps",
        "epoch_steps",
        "eval_episodes",
        "warmup_steps",
        "batch_size",
        "buffer_capacity",
        "update_every",
        "gamma",
        "tau",
        "hidden",
        "actor_lr",
        "critic_lr",
        "alpha",
        "log_std_min",
        "log_std_max",
        "noise_small",
        "noise_big",
        "sac_scale_up",
        "sac_scale_down",
        "metric",
        "sim_threshold",
        "sim_eta",
        "sim_min",
        "sim_max",
        "centering",
        "key_window",
        "pct_add_start",
        "pct_add_end",
        "pct_add_steps",
        "k_lower",
        "k_upper",
        "queue_sizing",
        "wall_clock",
    ];

    /// Set one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "run_id" => self.run_id = Some(v.to_string()),
            "env" => self.env = v.parse()?,
            "algo" => self.algo = v.parse()?,
            "an2n" => self.an2n = parse_bool(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "total_steps" => self.total_steps = parse(key, v)?,
            "epoch_steps" => self.epoch_steps = parse(key, v)?,
            "eval_episodes" => self.eval_episodes = parse(key, v)?,
            "warmup_steps" => self.warmup_steps = parse(key, v)?,
            "batch_size" => self.batch_size = parse(key, v)?,
            "buffer_capacity" => self.buffer_capacity = parse(key, v)?,
            "update_every" => self.update_every = parse(key, v)?,
            "gamma" => self.agent.gamma = parse(key, v)?,
            "tau" => self.agent.tau = parse(key, v)?,
            "hidden" => {
                self.agent.hidden = v
                    .split(|c: char| c == ',' || c == 'x' || c.is_whitespace())
                    .filter(|s| !s.is_empty())
                    .map(|s| parse(key, s))
                    .collect::<Result<_>>()?
            }
            "actor_lr" => self.agent.actor_lr = parse(key, v)?,
            "critic_lr" => self.agent.critic_lr = parse(key, v)?,
            "alpha" => self.agent.alpha = parse(key, v)?,
            "log_std_min" => self.agent.log_std_min = parse(key, v)?,
            "log_std_max" => self.agent.log_std_max = parse(key, v)?,
            "noise_small" => self.noise.small = parse(key, v)?,
            "noise_big" => self.noise.big = parse(key, v)?,
            "sac_scale_up" => self.noise.scale_up = parse(key, v)?,
            "sac_scale_down" => self.noise.scale_down = parse(key, v)?,
            "metric" => self.similarity.metric = v.parse::<SimilarityMetric>()?,
            "sim_threshold" => self.similarity.threshold = parse(key, v)?,
            "sim_eta" => self.similarity.eta = parse(key, v)?,
            "sim_min" => self.similarity.min_threshold = parse(key, v)?,
            "sim_max" => self.similarity.max_threshold = parse(key, v)?,
            "centering" => self.centering = v.parse()?,
            "key_window" => self.key_window = parse(key, v)?,
            "pct_add_start" => self.pct_add_start = parse(key, v)?,
            "pct_add_end" => self.pct_add_end = parse(key, v)?,
            "pct_add_steps" => self.pct_add_steps = Some(parse(key, v)?),
            "k_lower" => self.k_lower = parse(key, v)?,
            "k_upper" => self.k_upper = parse(key, v)?,
            "queue_sizing" => self.queue_sizing = v.parse()?,
            "wall_clock" => self.wall_clock = parse_bool(key, v)?,
            other => return Err(Error::Config { key: other.into(), reason: "unknown key".into() }),
        }
        Ok(())
    }

    /// Apply `key = value` lines on top of `self`. Blank lines and `#`
    /// comments are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                context: format!("config line {}", n + 1),
                reason: format!("expected `key = value`, got `{line}`"),
            })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    /// Canonical text form; [`RunConfig::from_text`] reads it back exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        if let Some(id) = &self.run_id {
            kv("run_id", id.clone());
        }
        kv("env", self.env.to_string());
        kv("algo", self.algo.to_string());
        kv("an2n", on_off(self.an2n).into());
        kv("seed", self.seed.to_string());
        kv("total_steps", self.total_steps.to_string());
        kv("epoch_steps", self.epoch_steps.to_string());
        kv("eval_episodes", self.eval_episodes.to_string());
        kv("warmup_steps", self.warmup_steps.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("buffer_capacity", self.buffer_capacity.to_string());
        kv("update_every", self.update_every.to_string());
        kv("gamma", self.agent.gamma.to_string());
        kv("tau", self.agent.tau.to_string());
        kv("hidden", self.agent.hidden.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(","));
        kv("actor_lr", self.agent.actor_lr.to_string());
        kv("critic_lr", self.agent.critic_lr.to_string());
        kv("alpha", self.agent.alpha.to_string());
        kv("log_std_min", self.agent.log_std_min.to_string());
        kv("log_std_max", self.agent.log_std_max.to_string());
        kv("noise_small", self.noise.small.to_string());
        kv("noise_big", self.noise.big.to_string());
        kv("sac_scale_up", self.noise.scale_up.to_string());
        kv("sac_scale_down", self.noise.scale_down.to_string());
        kv("metric", self.similarity.metric.to_string());
        kv("sim_threshold", self.similarity.threshold.to_string());
        kv("sim_eta", self.similarity.eta.to_string());
        kv("sim_min", self.similarity.min_threshold.to_string());
        kv("sim_max", self.similarity.max_threshold.to_string());
        kv("centering", self.centering.to_string());
        kv("key_window", self.key_window.to_string());
        kv("pct_add_start", self.pct_add_start.to_string());
        kv("pct_add_end", self.pct_add_end.to_string());
        if let Some(s) = self.pct_add_steps {
            kv("pct_add_steps", s.to_string());
        }
        kv("k_lower", self.k_lower.to_string());
        kv("k_upper", self.k_upper.to_string());
        kv("queue_sizing", self.queue_sizing.name().into());
        kv("wall_clock", on_off(self.wall_clock).into());
        out
    }

    pub fn run_id(&self) -> String {
        match &self.run_id {
            Some(id) => id.clone(),
            None => format!("{}-{}{}-s{}", self.env, self.algo, if self.an2n { "-an2n" } else { "" }, self.seed),
        }
    }

    pub fn schedule(&self) -> Result<PctAddSchedule> {
        PctAddSchedule::new(self.pct_add_start, self.pct_add_end, self.pct_add_steps.unwrap_or(self.total_steps))
    }

    pub fn num_epochs(&self) -> u64 {
        self.total_steps / self.epoch_steps
    }

    /// Check every cross-field constraint before any compute starts.
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: String| Err(Error::Config { key: key.into(), reason });
        let id = self.run_id();
        if id.is_empty() || id.contains([',', '\n', '\r', '"']) {
            return bad("run_id", format!("`{id}` must be non-empty without commas, quotes or newlines"));
        }
        if self.epoch_steps == 0 {
            return bad("epoch_steps", "must be positive".into());
        }
        if self.total_steps == 0 || !self.total_steps.is_multiple_of(self.epoch_steps) {
            return bad(
                "total_steps",
                format!("{} is not a positive multiple of epoch_steps {}", self.total_steps, self.epoch_steps),
            );
        }
        if self.eval_episodes == 0 {
            return bad("eval_episodes", "need at least one".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be positive".into());
        }
        if self.buffer_capacity == 0 {
            return bad("buffer_capacity", "must be positive".into());
        }
        if self.update_every == 0 {
            return bad("update_every", "must be positive".into());
        }
        if self.key_window == 0 {
            return bad("key_window", "must be positive".into());
        }
        if !(self.k_lower >= 1 && self.k_lower <= self.k_upper) {
            return bad("k_lower", format!("need 1 ≤ k_lower ≤ k_upper, got {} and {}", self.k_lower, self.k_upper));
        }
        self.agent.validate()?;
        self.noise.validate()?;
        self.similarity.validate()?;
        self.schedule()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.num_epochs(), 25);
        assert_eq!(cfg.run_id(), "pendulum-ddpg-an2n-s0");
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.apply_text(
            "# comment\nenv = cliff\nalgo=sac\nan2n = off\nseed = 15\nhidden = 32x16\n\
             metric = manhattan # trailing\nsim_threshold = 0.8\npct_add_steps = 9000\nqueue_sizing = adaptive\n",
        )
        .unwrap();
        assert_eq!(cfg.env, EnvKind::Cliff);
        assert_eq!(cfg.algo, Algo::Sac);
        assert!(!cfg.an2n);
        assert_eq!(cfg.agent.hidden, vec![32, 16]);
        assert_eq!(cfg.similarity.metric, SimilarityMetric::Manhattan);
        assert_eq!(RunConfig::from_text(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn every_documented_key_is_settable() {
        let text = RunConfig { run_id: Some("x".into()), pct_add_steps: Some(10), ..RunConfig::default() }.to_text();
        let written: Vec<&str> = text.lines().map(|l| l.split(" = ").next().unwrap()).collect();
        assert_eq!(written, RunConfig::KEYS);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(RunConfig::from_text("colour = red"), Err(Error::Config { .. })));
        assert!(RunConfig::from_text("seed = -1").is_err());
        assert!(RunConfig::from_text("an2n = maybe").is_err());
        assert!(RunConfig::from_text("no equals sign").is_err());
    }

    #[test]
    fn validation_catches_protocol_errors() {
        let mut cfg = RunConfig::from_text("total_steps = 5000\nepoch_steps = 2000").unwrap();
        assert!(cfg.validate().is_err());
        cfg.total_steps = 6000;
        cfg.validate().unwrap();
        cfg.eval_episodes = 0;
        assert!(cfg.validate().is_err());
        let cfg = RunConfig::from_text("k_lower = 30").unwrap();
        assert!(cfg.validate().is_err());
        let cfg = RunConfig::from_text("run_id = a,b").unwrap();
        assert!(cfg.validate().is_err());
    }
}
