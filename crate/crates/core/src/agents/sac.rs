use std::f64::consts::{LN_2, PI};

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand_distr::{Distribution, StandardNormal};

use super::{finite_or_err, state_action, AgentConfig, Batch};
use crate::envs::EnvSpec;
use crate::error::{Error, Result};
use crate::nn::{soft_update, Activation, AdamConfig, AdamState, GradientBundle, Mlp, OutputActivation};
use crate::rng::RunRng;

/// Hard range for the effective log standard deviation, after the
/// exploration scale has been applied.
pub const LOG_STD_HARD_MIN: f64 = -20.0;
pub const LOG_STD_HARD_MAX: f64 = 2.0;

/// `y = r + γ·(1 − done)·(min(q1, q2) − α·log π)`.
pub fn sac_target_value(reward: f64, gamma: f64, done: bool, q1: f64, q2: f64, alpha: f64, log_prob: f64) -> f64 {
    if done {
        reward
    } else {
        reward + gamma * (q1.min(q2) - alpha * log_prob)
    }
}

/// `ln(1 − tanh²u)`, stable for large `|u|`.
fn log_one_minus_tanh_sq(u: f64) -> f64 {
    let a = u.abs();
    2.0 * (LN_2 - a - (-2.0 * a).exp().ln_1p())
}

/// Log density of `a = bound·tanh(u)` where `u ~ N(mean, exp(log_std)²)`,
/// evaluated at the pre-squash value `u`, summed over dimensions.
pub fn squashed_log_prob(pre_tanh: &[f64], mean: &[f64], log_std: &[f64], bound: f64) -> f64 {
    pre_tanh
        .iter()
        .zip(mean)
        .zip(log_std)
        .map(|((&u, &m), &ls)| {
            let z = (u - m) / ls.exp();
            -0.5 * z * z - ls - 0.5 * (2.0 * PI).ln() - bound.ln() - log_one_minus_tanh_sq(u)
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SacSample {
    pub action: Vec<f64>,
    pub log_prob: f64,
}

/// Tanh-squashed Gaussian policy with twin critics and a fixed temperature.
#[derive(Debug, Clone)]
pub struct SacAgent {
    /// Emits `[mean; raw log-std]`, each of the action width.
    pub actor: Mlp,
    pub critic1: Mlp,
    pub critic2: Mlp,
    pub critic1_target: Mlp,
    pub critic2_target: Mlp,
    actor_opt: AdamState,
    critic1_opt: AdamState,
    critic2_opt: AdamState,
    gamma: f64,
    tau: f64,
    alpha: f64,
    log_std_min: f64,
    log_std_max: f64,
    action_bound: f64,
    action_dim: usize,
}

/// Per-row policy quantities for one batch.
pub(crate) struct PolicyPass {
    pub(crate) mean: Array2<f64>,
    pub(crate) log_std: Array2<f64>,
    /// 1 where the raw log-std passes through both clamps unchanged.
    pub(crate) mask: Array2<f64>,
    pub(crate) pre_tanh: Array2<f64>,
    pub(crate) actions: Array2<f64>,
    pub(crate) log_probs: Array1<f64>,
}

impl SacAgent {
    pub fn new(spec: &EnvSpec, cfg: &AgentConfig, rng: &mut RunRng) -> Result<Self> {
        cfg.validate()?;
        let mut actor_widths = vec![spec.state_dim];
        actor_widths.extend(&cfg.hidden);
        actor_widths.push(2 * spec.action_dim);
        let mut critic_widths = vec![spec.state_dim + spec.action_dim];
        critic_widths.extend(&cfg.hidden);
        critic_widths.push(1);

        let mut actor = Mlp::new(&actor_widths, Activation::Relu, OutputActivation::Identity, rng)?;
        actor.scale_output_layer(1e-3);
        let critic1 = Mlp::new(&critic_widths, Activation::Relu, OutputActivation::Identity, rng)?;
        let critic2 = Mlp::new(&critic_widths, Activation::Relu, OutputActivation::Identity, rng)?;
        Ok(SacAgent {
            actor_opt: AdamState::new(&actor, AdamConfig::with_lr(cfg.actor_lr)),
            critic1_opt: AdamState::new(&critic1, AdamConfig::with_lr(cfg.critic_lr)),
            critic2_opt: AdamState::new(&critic2, AdamConfig::with_lr(cfg.critic_lr)),
            critic1_target: critic1.clone(),
            critic2_target: critic2.clone(),
            actor,
            critic1,
            critic2,
            gamma: cfg.gamma,
            tau: cfg.tau,
            alpha: cfg.alpha,
            log_std_min: cfg.log_std_min,
            log_std_max: cfg.log_std_max,
            action_bound: spec.action_bound,
            action_dim: spec.action_dim,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn action_bound(&self) -> f64 {
        self.action_bound
    }

    /// Effective log-std for a raw network output under exploration scale
    /// `scale`, plus whether the gradient passes through.
    pub fn effective_log_std(&self, raw: f64, scale: f64) -> (f64, bool) {
        let inner = raw.clamp(self.log_std_min, self.log_std_max);
        let shifted = inner + scale.ln();
        let outer = shifted.clamp(LOG_STD_HARD_MIN, LOG_STD_HARD_MAX);
        let open = raw > self.log_std_min && raw < self.log_std_max && outer == shifted;
        (outer, open)
    }

    fn split(&self, out: &[f64], scale: f64) -> (Vec<f64>, Vec<f64>) {
        let ad = self.action_dim;
        let mean = out[..ad].to_vec();
        let log_std = out[ad..].iter().map(|&r| self.effective_log_std(r, scale).0).collect();
        (mean, log_std)
    }

    /// Squashed policy mean, `bound·tanh(mean)`.
    pub fn mean_action(&self, state: &[f64]) -> Result<Vec<f64>> {
        let out = self.actor.forward(state)?;
        Ok(out[..self.action_dim].iter().map(|m| self.action_bound * m.tanh()).collect())
    }

    /// Draws `u ~ N(mean, (scale·σ)²)` and returns `bound·tanh(u)` with its
    /// log density. With `deterministic` set, no noise is drawn and the
    /// squashed mean is returned along with the density at that point.
    pub fn act(&self, state: &[f64], scale: f64, rng: &mut RunRng, deterministic: bool) -> Result<SacSample> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid("variance scale", format!("{scale}")));
        }
        let out = self.actor.forward(state)?;
        let (mean, log_std) = self.split(&out, scale);
        let pre_tanh: Vec<f64> = if deterministic {
            mean.clone()
        } else {
            mean.iter()
                .zip(&log_std)
                .map(|(m, ls)| {
                    let eps: f64 = StandardNormal.sample(rng);
                    m + ls.exp() * eps
                })
                .collect()
        };
        let log_prob = squashed_log_prob(&pre_tanh, &mean, &log_std, self.action_bound);
        Ok(SacSample { action: pre_tanh.iter().map(|u| self.action_bound * u.tanh()).collect(), log_prob })
    }

    /// `min(Q'_1, Q'_2)` at the squashed mean action.
    pub fn bootstrap_value(&self, state: &[f64]) -> Result<f64> {
        let a = self.mean_action(state)?;
        let sa: Vec<f64> = state.iter().chain(&a).copied().collect();
        let q1 = self.critic1_target.forward(&sa)?[0];
        let q2 = self.critic2_target.forward(&sa)?[0];
        Ok(q1.min(q2))
    }

    fn sample_noise(&self, rows: usize, rng: &mut RunRng) -> Array2<f64> {
        Array2::from_shape_simple_fn((rows, self.action_dim), || StandardNormal.sample(rng))
    }

    pub(crate) fn policy_pass(&self, actor_out: &Array2<f64>, eps: ArrayView2<f64>) -> PolicyPass {
        let ad = self.action_dim;
        let mean = actor_out.slice(s![.., ..ad]).to_owned();
        let raw = actor_out.slice(s![.., ad..]);
        let mut log_std = Array2::zeros(raw.raw_dim());
        let mut mask = Array2::zeros(raw.raw_dim());
        Zip::from(&mut log_std).and(&mut mask).and(raw).for_each(|ls, m, &r| {
            let (v, open) = self.effective_log_std(r, 1.0);
            *ls = v;
            *m = if open { 1.0 } else { 0.0 };
        });
        let pre_tanh = &mean + &(log_std.mapv(f64::exp) * eps);
        let actions = pre_tanh.mapv(|u| self.action_bound * u.tanh());
        let log_probs = Array1::from_iter((0..mean.nrows()).map(|i| {
            squashed_log_prob(
                pre_tanh.row(i).as_slice().expect("standard layout"),
                mean.row(i).as_slice().expect("standard layout"),
                log_std.row(i).as_slice().expect("standard layout"),
                self.action_bound,
            )
        }));
        PolicyPass { mean, log_std, mask, pre_tanh, actions, log_probs }
    }

    /// TD targets with next actions reparameterized from `eps`.
    pub fn td_targets_with_noise(&self, batch: &Batch, eps: ArrayView2<f64>) -> Result<Array1<f64>> {
        let out = self.actor.forward_batch(batch.next_states.view())?;
        let pass = self.policy_pass(&out, eps);
        let sa = state_action(batch.next_states.view(), pass.actions.view());
        let q1 = self.critic1_target.forward_batch(sa.view())?;
        let q2 = self.critic2_target.forward_batch(sa.view())?;
        Ok(Array1::from_iter((0..batch.len()).map(|i| {
            sac_target_value(
                batch.rewards[i],
                self.gamma,
                batch.dones[i] > 0.5,
                q1[[i, 0]],
                q2[[i, 0]],
                self.alpha,
                pass.log_probs[i],
            )
        })))
    }

    pub fn td_targets(&self, batch: &Batch, rng: &mut RunRng) -> Result<Array1<f64>> {
        let eps = self.sample_noise(batch.len(), rng);
        self.td_targets_with_noise(batch, eps.view())
    }

    /// `(1/N) Σ (y − Q(s, a))²` and its gradient for one critic.
    pub fn critic_loss_and_grad(
        critic: &Mlp,
        states: ArrayView2<f64>,
        actions: ArrayView2<f64>,
        targets: ArrayView1<f64>,
    ) -> Result<(f64, GradientBundle)> {
        let n = states.nrows() as f64;
        let cache = critic.forward_cached(state_action(states, actions).view())?;
        let diff = &cache.output().column(0) - &targets;
        let loss = finite_or_err(diff.mapv(|d| d * d).sum() / n, "critic loss")?;
        let out_grad = diff.mapv(|d| 2.0 * d / n).insert_axis(Axis(1));
        let bp = critic.backward_cached(&cache, out_grad.view())?;
        Ok((loss, bp.grads))
    }

    /// `(1/N) Σ (α·log π(ã|s) − min_j Q_j(s, ã))` with `ã` reparameterized
    /// from the fixed base noise `eps`, and its gradient for the actor.
    pub fn actor_loss_and_grad(&self, states: ArrayView2<f64>, eps: ArrayView2<f64>) -> Result<(f64, GradientBundle)> {
        let n = states.nrows();
        let nf = n as f64;
        let sd = states.ncols();
        let b = self.action_bound;
        let actor_cache = self.actor.forward_cached(states)?;
        let pass = self.policy_pass(actor_cache.output(), eps);

        let sa = state_action(states, pass.actions.view());
        let c1 = self.critic1.forward_cached(sa.view())?;
        let c2 = self.critic2.forward_cached(sa.view())?;
        let mut g1 = Array2::zeros((n, 1));
        let mut g2 = Array2::zeros((n, 1));
        let mut loss = 0.0;
        for i in 0..n {
            let (q1, q2) = (c1.output()[[i, 0]], c2.output()[[i, 0]]);
            if q1 <= q2 {
                g1[[i, 0]] = 1.0 / nf;
            } else {
                g2[[i, 0]] = 1.0 / nf;
            }
            loss += self.alpha * pass.log_probs[i] - q1.min(q2);
        }
        let loss = finite_or_err(loss / nf, "actor loss")?;
        let dq1 = self.critic1.backward_cached(&c1, g1.view())?.input_grad;
        let dq2 = self.critic2.backward_cached(&c2, g2.view())?.input_grad;
        let dq_da = &dq1.slice(s![.., sd..]) + &dq2.slice(s![.., sd..]);

        let ad = self.action_dim;
        let mut out_grad = Array2::zeros((n, 2 * ad));
        for i in 0..n {
            for k in 0..ad {
                let t = pass.pre_tanh[[i, k]].tanh();
                let sigma_eps = pass.log_std[[i, k]].exp() * eps[[i, k]];
                let d_u = self.alpha * 2.0 * t / nf - dq_da[[i, k]] * b * (1.0 - t * t);
                let d_ls = -self.alpha / nf + d_u * sigma_eps;
                out_grad[[i, k]] = d_u;
                out_grad[[i, ad + k]] = pass.mask[[i, k]] * d_ls;
            }
        }
        debug_assert_eq!(pass.mean.nrows(), n);
        let bp = self.actor.backward_cached(&actor_cache, out_grad.view())?;
        Ok((loss, bp.grads))
    }

    /// Steps both critics, then the actor against the updated critics, then
    /// Polyak-updates the target critics. Returns the two critic losses and
    /// the actor objective `−loss`.
    pub fn update(&mut self, batch: &Batch, rng: &mut RunRng) -> Result<(f64, f64, f64)> {
        let targets = self.td_targets(batch, rng)?;
        let (l1, g1) =
            Self::critic_loss_and_grad(&self.critic1, batch.states.view(), batch.actions.view(), targets.view())?;
        let (l2, g2) =
            Self::critic_loss_and_grad(&self.critic2, batch.states.view(), batch.actions.view(), targets.view())?;
        self.critic1_opt.apply(&mut self.critic1, &g1)?;
        self.critic2_opt.apply(&mut self.critic2, &g2)?;

        let eps = self.sample_noise(batch.len(), rng);
        let (actor_loss, actor_grad) = self.actor_loss_and_grad(batch.states.view(), eps.view())?;
        self.actor_opt.apply(&mut self.actor, &actor_grad)?;

        soft_update(&mut self.critic1_target, &self.critic1, self.tau)?;
        soft_update(&mut self.critic2_target, &self.critic2, self.tau)?;
        Ok((l1, l2, -actor_loss))
    }
}
