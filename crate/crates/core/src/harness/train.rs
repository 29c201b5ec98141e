use std::time::Instant;

use rand::Rng;

use super::config::{QueueSizing, RunConfig};
use super::metrics::MetricsRecord;
use crate::agents::{Agent, Batch};
use crate::an2n::{
    key_state_count, noise_for, score_trajectory, select_worst, ungated, Discount, GateDecision, KeyStateGate,
};
use crate::envs::{EnvKind, EnvSpec};
use crate::error::{Error, Result};
use crate::replay::{EvalTrajectory, KeyStateEntry, KeyStateQueue, ReplayBuffer, Transition};
use crate::rng::{stream, RunRng, Stream};

/// Result of a batch of noise-free rollouts.
#[derive(Debug, Clone)]
pub struct EvalOutcome {
    /// Undiscounted return of each episode.
    pub returns: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation of `returns`.
    pub std: f64,
    pub trajectories: Vec<EvalTrajectory>,
}

impl EvalOutcome {
    /// Index of the highest-return episode (earliest on ties).
    pub fn best(&self) -> usize {
        arg_by(&self.returns, |a, b| a > b)
    }

    /// Index of the lowest-return episode (earliest on ties).
    pub fn worst(&self) -> usize {
        arg_by(&self.returns, |a, b| a < b)
    }
}

fn arg_by(xs: &[f64], better: impl Fn(f64, f64) -> bool) -> usize {
    let mut idx = 0;
    for (i, &x) in xs.iter().enumerate() {
        if better(x, xs[idx]) {
            idx = i;
        }
    }
    idx
}

pub(crate) fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Run `episodes` full episodes with `policy`, resetting from `rng`.
pub fn rollout_episodes(
    env_kind: EnvKind,
    episodes: usize,
    rng: &mut RunRng,
    mut policy: impl FnMut(&[f64]) -> Result<Vec<f64>>,
) -> Result<EvalOutcome> {
    if episodes == 0 {
        return Err(Error::invalid("episodes", "need at least one"));
    }
    let mut env = env_kind.make();
    let mut trajectories = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut state = env.reset(rng);
        let mut states = Vec::new();
        let mut rewards = Vec::new();
        loop {
            let action = policy(&state)?;
            let res = env.step(&action)?;
            states.push(std::mem::replace(&mut state, res.next_state));
            rewards.push(res.reward);
            if res.done {
                trajectories.push(EvalTrajectory::new(states, rewards, state, res.terminal)?);
                break;
            }
        }
    }
    let returns: Vec<f64> = trajectories.iter().map(EvalTrajectory::total_reward).collect();
    let (mean, std) = mean_std(&returns);
    Ok(EvalOutcome { returns, mean, std, trajectories })
}

/// Noise-free evaluation of `agent`. Episode starts come from `seed`, so two
/// calls with the same parameters and seed give identical returns.
pub fn evaluate(agent: &Agent, env_kind: EnvKind, episodes: usize, seed: u64) -> Result<EvalOutcome> {
    let mut rng = stream(seed, Stream::Eval, 0);
    rollout_episodes(env_kind, episodes, &mut rng, |s| agent.act_deterministic(s))
}

/// Uniform random actions over the action box.
pub fn random_policy_returns(env_kind: EnvKind, episodes: usize, seed: u64) -> Result<EvalOutcome> {
    let spec = env_kind.spec();
    let mut env_rng = stream(seed, Stream::Eval, 0);
    let mut act_rng = stream(seed, Stream::Warmup, 0);
    rollout_episodes(env_kind, episodes, &mut env_rng, |_| Ok(uniform_action(&spec, &mut act_rng)))
}

fn uniform_action(spec: &EnvSpec, rng: &mut RunRng) -> Vec<f64> {
    (0..spec.action_dim).map(|_| rng.random_range(-spec.action_bound..=spec.action_bound)).collect()
}

/// Hooks into a training run, for tests and tooling that need more than the
/// per-epoch records.
pub trait RunObserver {
    /// Every environment step. `decision` is present when the gate ran.
    fn on_step(&mut self, _step: u64, _transition: &Transition, _decision: Option<&GateDecision>) {}

    /// Key states admitted after an evaluation.
    fn on_admit(&mut self, _epoch: u64, _admitted: &[KeyStateEntry]) {}

    fn on_epoch(&mut self, _record: &MetricsRecord, _eval: &EvalOutcome) {}
}

impl RunObserver for () {}

/// Evaluation seed for a given epoch of a run: every arm with the same run
/// seed sees the same evaluation starts.
fn eval_seed(run_seed: u64, epoch: u64) -> u64 {
    run_seed.wrapping_mul(1_000_003).wrapping_add(epoch)
}

struct EpochStats {
    key_steps: u64,
    steps: u64,
    loss_sum: f64,
    updates: u64,
}

impl EpochStats {
    fn new() -> Self {
        EpochStats { key_steps: 0, steps: 0, loss_sum: 0.0, updates: 0 }
    }
}

pub fn run_training(cfg: &RunConfig) -> Result<Vec<MetricsRecord>> {
    run_training_observed(cfg, &mut ())
}

/// Warm-up, then interact → store → gate → update, with an evaluation and
/// key-state refresh at the end of every epoch. Deterministic given the
/// config.
pub fn run_training_observed(cfg: &RunConfig, observer: &mut dyn RunObserver) -> Result<Vec<MetricsRecord>> {
    cfg.validate()?;
    let started = Instant::now();
    let spec = cfg.env.spec();
    let run_id = cfg.run_id();
    let gamma = Discount::new(cfg.agent.gamma)?;
    let mode = cfg.algo.noise_mode();

    let mut agent = Agent::new(cfg.algo, &spec, &cfg.agent, &mut stream(cfg.seed, Stream::Init, 0))?;
    let mut env_rng = stream(cfg.seed, Stream::Env, 0);
    let mut noise_rng = stream(cfg.seed, Stream::ActionNoise, 0);
    let mut batch_rng = stream(cfg.seed, Stream::Batch, 0);
    let mut warmup_rng = stream(cfg.seed, Stream::Warmup, 0);

    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity)?;
    let mut queue = KeyStateQueue::new(cfg.k_lower, cfg.k_upper)?;
    let mut gate = KeyStateGate::new(cfg.similarity, cfg.centering, spec.state_dim, cfg.key_window, cfg.schedule()?)?;
    let mut eval_sum = 0.0;
    let mut eval_count = 0usize;

    let mut env = cfg.env.make();
    let mut state = env.reset(&mut env_rng);
    let mut records = Vec::with_capacity(cfg.num_epochs() as usize);
    let mut stats = EpochStats::new();

    for step in 0..cfg.total_steps {
        let mut decision = None;
        if cfg.an2n {
            gate.observe(&state)?;
        }
        let action = if step < cfg.warmup_steps {
            uniform_action(&spec, &mut warmup_rng)
        } else if cfg.an2n {
            let d = gate.decide(&state, &queue, step)?;
            let exploration = noise_for(d.is_key, &cfg.noise, mode);
            if d.is_key {
                stats.key_steps += 1;
            }
            decision = Some(d);
            agent.explore(&state, exploration, &mut noise_rng)?
        } else {
            agent.explore(&state, ungated(&cfg.noise, mode), &mut noise_rng)?
        };
        stats.steps += 1;

        let res = env.step(&action)?;
        let transition = Transition {
            state: std::mem::take(&mut state),
            action,
            reward: res.reward,
            next_state: res.next_state,
            done: res.terminal,
        };
        observer.on_step(step, &transition, decision.as_ref());
        state = if res.done { env.reset(&mut env_rng) } else { transition.next_state.clone() };
        buffer.push(transition);

        if step + 1 >= cfg.warmup_steps && (step + 1) % cfg.update_every == 0 {
            let sampled = buffer.sample(cfg.batch_size, &mut batch_rng)?;
            let batch = Batch::from_transitions(&sampled)?;
            let update = agent.update(&batch, &mut batch_rng).map_err(|e| match e {
                Error::NonFinite { context, detail } => {
                    Error::NonFinite { context, detail: format!("{detail} (run {run_id}, step {})", step + 1) }
                }
                other => other,
            })?;
            stats.loss_sum += update.critic_loss;
            stats.updates += 1;
        }

        if (step + 1) % cfg.epoch_steps == 0 {
            let epoch = (step + 1) / cfg.epoch_steps;
            let eval = evaluate(&agent, cfg.env, cfg.eval_episodes, eval_seed(cfg.seed, epoch))?;
            eval_sum += eval.returns.iter().sum::<f64>();
            eval_count += eval.returns.len();

            if cfg.an2n {
                let avg = eval_sum / eval_count as f64;
                let traj = &eval.trajectories[eval.best()];
                let terminal_value = if traj.terminal { 0.0 } else { agent.bootstrap_value(&traj.final_state)? };
                let scores = score_trajectory(traj, terminal_value, gamma)?;
                let count = key_state_count(avg, traj.total_reward(), cfg.k_lower, cfg.k_upper);
                if cfg.queue_sizing == QueueSizing::Adaptive {
                    queue.resize(count)?;
                }
                let admitted = select_worst(&traj.states, &scores, count, epoch as usize)?;
                observer.on_admit(epoch, &admitted);
                queue.admit(admitted);
            }

            let record = MetricsRecord {
                run_id: run_id.clone(),
                seed: cfg.seed,
                env: cfg.env,
                algo: cfg.algo,
                an2n: cfg.an2n,
                epoch,
                step: step + 1,
                eval_return_mean: eval.mean,
                eval_return_std: eval.std,
                key_fraction: stats.key_steps as f64 / stats.steps as f64,
                sim_threshold: gate.threshold(),
                fifo_len: queue.len(),
                critic_loss: if stats.updates > 0 { stats.loss_sum / stats.updates as f64 } else { 0.0 },
                wall_ms: if cfg.wall_clock { started.elapsed().as_millis() as u64 } else { 0 },
            };
            observer.on_epoch(&record, &eval);
            records.push(record);
            stats = EpochStats::new();
        }
    }
    Ok(records)
}
