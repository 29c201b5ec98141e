use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use rand_distr::{Distribution, StandardNormal};

use super::{finite_or_err, state_action, AgentConfig, Batch, UpdateStats};
use crate::envs::EnvSpec;
use crate::error::{Error, Result};
use crate::nn::{soft_update, Activation, AdamConfig, AdamState, GradientBundle, Mlp, OutputActivation};
use crate::rng::RunRng;

/// `y = r + γ·(1 − done)·q_next`.
pub fn ddpg_target_value(reward: f64, gamma: f64, done: bool, q_next: f64) -> f64 {
    if done {
        reward
    } else {
        reward + gamma * q_next
    }
}

/// Deterministic actor `μ(s)`, critic `Q(s, a)`, and their slowly-tracking
/// target copies.
#[derive(Debug, Clone)]
pub struct DdpgAgent {
    pub actor: Mlp,
    pub critic: Mlp,
    pub actor_target: Mlp,
    pub critic_target: Mlp,
    actor_opt: AdamState,
    critic_opt: AdamState,
    gamma: f64,
    tau: f64,
    action_bound: f64,
}

impl DdpgAgent {
    pub fn new(spec: &EnvSpec, cfg: &AgentConfig, rng: &mut RunRng) -> Result<Self> {
        cfg.validate()?;
        let mut actor_widths = vec![spec.state_dim];
        actor_widths.extend(&cfg.hidden);
        actor_widths.push(spec.action_dim);
        let mut critic_widths = vec![spec.state_dim + spec.action_dim];
        critic_widths.extend(&cfg.hidden);
        critic_widths.push(1);

        let mut actor =
            Mlp::new(&actor_widths, Activation::Relu, OutputActivation::ScaledTanh(spec.action_bound), rng)?;
        actor.scale_output_layer(1e-3);
        let critic = Mlp::new(&critic_widths, Activation::Relu, OutputActivation::Identity, rng)?;
        Ok(DdpgAgent {
            actor_opt: AdamState::new(&actor, AdamConfig::with_lr(cfg.actor_lr)),
            critic_opt: AdamState::new(&critic, AdamConfig::with_lr(cfg.critic_lr)),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            gamma: cfg.gamma,
            tau: cfg.tau,
            action_bound: spec.action_bound,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn action_bound(&self) -> f64 {
        self.action_bound
    }

    pub fn policy(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.actor.forward(state)
    }

    /// `clip(μ(s) + ε, ±bound)` with `ε ~ N(0, noise_std²·I)`. One normal is
    /// drawn per action component whatever the scale, so the noise stream
    /// advances identically for every scale.
    pub fn act(&self, state: &[f64], noise_std: f64, rng: &mut RunRng) -> Result<Vec<f64>> {
        if !(noise_std >= 0.0 && noise_std.is_finite()) {
            return Err(Error::invalid("noise scale", format!("{noise_std}")));
        }
        let mut a = self.actor.forward(state)?;
        for v in &mut a {
            let eps: f64 = StandardNormal.sample(rng);
            *v = (*v + noise_std * eps).clamp(-self.action_bound, self.action_bound);
        }
        Ok(a)
    }

    /// `Q'(s, μ(s))`: target critic at the online actor's action.
    pub fn bootstrap_value(&self, state: &[f64]) -> Result<f64> {
        let a = self.actor.forward(state)?;
        let sa: Vec<f64> = state.iter().chain(&a).copied().collect();
        Ok(self.critic_target.forward(&sa)?[0])
    }

    /// TD targets from the target networks only.
    pub fn td_targets(&self, batch: &Batch) -> Result<Array1<f64>> {
        let next_actions = self.actor_target.forward_batch(batch.next_states.view())?;
        let q_next =
            self.critic_target.forward_batch(state_action(batch.next_states.view(), next_actions.view()).view())?;
        Ok(Array1::from_iter(
            (0..batch.len())
                .map(|i| ddpg_target_value(batch.rewards[i], self.gamma, batch.dones[i] > 0.5, q_next[[i, 0]])),
        ))
    }

    /// `(1/N) Σ (y − Q(s, a))²` and its gradient with respect to the critic.
    pub fn critic_loss_and_grad(
        &self,
        states: ArrayView2<f64>,
        actions: ArrayView2<f64>,
        targets: ArrayView1<f64>,
    ) -> Result<(f64, GradientBundle)> {
        let n = states.nrows() as f64;
        let cache = self.critic.forward_cached(state_action(states, actions).view())?;
        let diff = &cache.output().column(0) - &targets;
        let loss = finite_or_err(diff.mapv(|d| d * d).sum() / n, "critic loss")?;
        let out_grad = diff.mapv(|d| 2.0 * d / n).insert_axis(ndarray::Axis(1));
        let bp = self.critic.backward_cached(&cache, out_grad.view())?;
        Ok((loss, bp.grads))
    }

    /// `(1/N) Σ Q(s, μ(s))` and its gradient with respect to the actor
    /// (ascent direction), chained through the critic's action input.
    pub fn actor_objective_and_grad(&self, states: ArrayView2<f64>) -> Result<(f64, GradientBundle)> {
        let n = states.nrows();
        let sd = states.ncols();
        let actor_cache = self.actor.forward_cached(states)?;
        let critic_cache = self.critic.forward_cached(state_action(states, actor_cache.output().view()).view())?;
        let objective = finite_or_err(critic_cache.output().sum() / n as f64, "actor objective")?;
        let ones = Array2::from_elem((n, 1), 1.0 / n as f64);
        let dq = self.critic.backward_cached(&critic_cache, ones.view())?;
        let dq_da = dq.input_grad.slice(s![.., sd..]);
        let bp = self.actor.backward_cached(&actor_cache, dq_da)?;
        Ok((objective, bp.grads))
    }

    /// One critic step, one actor step against the freshly updated critic,
    /// then Polyak updates of both targets.
    pub fn update(&mut self, batch: &Batch) -> Result<UpdateStats> {
        let targets = self.td_targets(batch)?;
        let (critic_loss, critic_grad) =
            self.critic_loss_and_grad(batch.states.view(), batch.actions.view(), targets.view())?;
        self.critic_opt.apply(&mut self.critic, &critic_grad)?;

        let (actor_objective, mut actor_grad) = self.actor_objective_and_grad(batch.states.view())?;
        actor_grad.scale(-1.0);
        self.actor_opt.apply(&mut self.actor, &actor_grad)?;

        soft_update(&mut self.critic_target, &self.critic, self.tau)?;
        soft_update(&mut self.actor_target, &self.actor, self.tau)?;
        Ok(UpdateStats { critic_loss, actor_objective })
    }
}
