//! Built-in oracle suites, runnable from the command line.
//!
//! Each suite checks a library component against an independent reference:
//! brute-force sums, finite differences, closed-loop simulation, or a
//! plain list model.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::agents::{state_action, AgentConfig, Batch, DdpgAgent, SacAgent};
use crate::an2n::{
    cosine_similarity, key_state_count, manhattan_similarity, pct_add_at, score_returns, Centering, Discount,
    KeyStateGate, PctAddSchedule, SimilarityConfig, SimilarityMetric, ZERO_RETURN_EPS,
};
use crate::envs::EnvSpec;
use crate::error::Result;
use crate::nn::{GradientBundle, Mlp};
use crate::replay::{KeyStateEntry, KeyStateQueue, Transition};
use crate::rng::{stream, RunRng, Stream};

pub type CosineFn = fn(&[f64], &[f64], &[f64]) -> Result<f64>;

/// Replaceable pieces, so a deliberately broken implementation can be fed
/// through the suites to confirm they notice.
#[derive(Clone, Copy)]
pub struct SelftestHooks {
    pub cosine: CosineFn,
}

impl Default for SelftestHooks {
    fn default() -> Self {
        SelftestHooks { cosine: cosine_similarity }
    }
}

/// Cosine with the numerator's sign flipped: the documented mutation.
pub fn cosine_sign_flipped(a: &[f64], b: &[f64], center: &[f64]) -> Result<f64> {
    cosine_similarity(a, b, center).map(|c| -c)
}

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

fn timed(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> SuiteResult {
    let start = Instant::now();
    let (passed, detail) = match f() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    SuiteResult { name, passed, detail, elapsed: start.elapsed() }
}

pub fn run_all(hooks: &SelftestHooks) -> Vec<SuiteResult> {
    vec![
        timed("n-step returns vs brute force", nstep_suite),
        timed("gradients vs finite differences", gradient_suite),
        timed("similarity properties", || similarity_suite(hooks)),
        timed("threshold controller convergence", controller_suite),
        timed("key-state count formula", clip_suite),
        timed("key-state queue vs list model", queue_suite),
    ]
}

pub fn all_passed(results: &[SuiteResult]) -> bool {
    results.iter().all(|r| r.passed)
}

pub fn format_table(results: &[SuiteResult]) -> String {
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut out = String::new();
    for r in results {
        let _ = writeln!(
            out,
            "{:<width$}  {}  {:>8.2}s  {}",
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.elapsed.as_secs_f64(),
            r.detail
        );
    }
    out
}

/// Relative error of the backward sweep against the direct sum, scaled by
/// the sum of absolute terms so cancellation does not inflate it.
pub fn nstep_suite() -> Result<(bool, String)> {
    let mut rng = stream(0x5eed, Stream::Eval, 1);
    let gammas = [0.0, 0.5, 0.9, 0.99, 1.0];
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let gamma = gammas[i % gammas.len()];
        let len = rng.random_range(1..=200usize);
        let rewards: Vec<f64> = (0..len).map(|_| rng.random_range(-10.0..10.0)).collect();
        let terminal: f64 = rng.random_range(-100.0..100.0);
        let swept = score_returns(&rewards, terminal, Discount::new(gamma)?)?;
        for t in 0..len {
            let (mut sum, mut abs) = (0.0, 0.0);
            let mut disc = 1.0;
            for r in &rewards[t..] {
                sum += disc * r;
                abs += (disc * r).abs();
                disc *= gamma;
            }
            sum += disc * terminal;
            abs += (disc * terminal).abs();
            let err = (swept[t] - sum).abs() / abs.max(f64::MIN_POSITIVE);
            worst = worst.max(err);
        }
    }
    Ok((worst <= 1e-12, format!("max relative error {worst:.2e} over 1000 trajectories")))
}

/// `|a − f| / max(|a|, |f|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Gradients below this magnitude are compared absolutely: central
/// differences with `h = 1e-5` carry round-off near `ε·|loss|/h ≈ 1e-11`.
pub const GRADIENT_FLOOR: f64 = 1e-6;

/// Signs of every hidden pre-activation of `net` on `x`. A change between
/// the two ends of a finite-difference stencil means it straddles a ReLU
/// kink, where the derivative does not exist.
fn hidden_signs(net: &Mlp, x: ArrayView2<f64>, out: &mut Vec<bool>) -> Result<()> {
    let cache = net.forward_cached(x)?;
    let pre = cache.pre_activations();
    for z in &pre[..pre.len() - 1] {
        out.extend(z.iter().map(|&v| v > 0.0));
    }
    Ok(())
}

/// Worst relative error over every parameter whose stencil stays on one
/// smooth piece, and how many parameters were set aside for crossing a kink.
#[derive(Debug, Clone, Copy, Default)]
struct FdCheck {
    worst: f64,
    skipped: usize,
    checked: usize,
}

impl FdCheck {
    fn merge(&mut self, other: FdCheck) {
        self.worst = self.worst.max(other.worst);
        self.skipped += other.skipped;
        self.checked += other.checked;
    }
}

fn fd_check(
    analytic: &GradientBundle,
    base: &Mlp,
    h: f64,
    mut eval: impl FnMut(&Mlp) -> Result<(f64, Vec<bool>)>,
) -> Result<FdCheck> {
    let mut out = FdCheck::default();
    let (_, pattern) = eval(base)?;
    let mut probe = base.clone();
    for (i, g) in analytic.iter().enumerate() {
        let p = base.param(i);
        probe.set_param(i, p + h);
        let (up, up_pattern) = eval(&probe)?;
        probe.set_param(i, p - h);
        let (down, down_pattern) = eval(&probe)?;
        probe.set_param(i, p);
        if up_pattern != pattern || down_pattern != pattern {
            out.skipped += 1;
            continue;
        }
        out.checked += 1;
        out.worst = out.worst.max(relative_error(g, (up - down) / (2.0 * h), GRADIENT_FLOOR));
    }
    Ok(out)
}

fn random_batch(rng: &mut RunRng, spec: &EnvSpec, n: usize) -> Result<Batch> {
    let ts: Vec<Transition> = (0..n)
        .map(|i| Transition {
            state: (0..spec.state_dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            action: (0..spec.action_dim).map(|_| rng.random_range(-spec.action_bound..spec.action_bound)).collect(),
            reward: rng.random_range(-1.0..1.0),
            next_state: (0..spec.state_dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            done: i % 5 == 0,
        })
        .collect();
    Batch::from_transitions(&ts.iter().collect::<Vec<_>>())
}

fn ddpg_critic_eval(agent: &DdpgAgent, batch: &Batch, y: ArrayView1<f64>) -> Result<(f64, Vec<bool>)> {
    let loss = agent.critic_loss_and_grad(batch.states.view(), batch.actions.view(), y)?.0;
    let mut sig = Vec::new();
    hidden_signs(&agent.critic, state_action(batch.states.view(), batch.actions.view()).view(), &mut sig)?;
    Ok((loss, sig))
}

fn ddpg_actor_eval(agent: &DdpgAgent, states: ArrayView2<f64>) -> Result<(f64, Vec<bool>)> {
    let objective = agent.actor_objective_and_grad(states)?.0;
    let mut sig = Vec::new();
    hidden_signs(&agent.actor, states, &mut sig)?;
    let actions = agent.actor.forward_batch(states)?;
    hidden_signs(&agent.critic, state_action(states, actions.view()).view(), &mut sig)?;
    Ok((objective, sig))
}

fn sac_actor_eval(agent: &SacAgent, states: ArrayView2<f64>, eps: ArrayView2<f64>) -> Result<(f64, Vec<bool>)> {
    let loss = agent.actor_loss_and_grad(states, eps)?.0;
    let mut sig = Vec::new();
    hidden_signs(&agent.actor, states, &mut sig)?;
    let pass = agent.policy_pass(&agent.actor.forward_batch(states)?, eps);
    sig.extend(pass.mask.iter().map(|&m| m > 0.0));
    let sa = state_action(states, pass.actions.view());
    hidden_signs(&agent.critic1, sa.view(), &mut sig)?;
    hidden_signs(&agent.critic2, sa.view(), &mut sig)?;
    let q1 = agent.critic1.forward_batch(sa.view())?;
    let q2 = agent.critic2.forward_batch(sa.view())?;
    sig.extend(q1.iter().zip(q2.iter()).map(|(a, b)| a <= b));
    Ok((loss, sig))
}

/// Central differences (`h = 1e-5`) over every parameter at 20 random
/// parameter points each for the DDPG critic, DDPG actor, and SAC actor.
/// Parameters whose stencil crosses a ReLU kink, a log-std clamp edge, or a
/// switch of the smaller twin critic are counted and left out.
pub fn gradient_suite() -> Result<(bool, String)> {
    let h = 1e-5;
    let spec = EnvSpec { state_dim: 3, action_dim: 2, action_bound: 2.0, max_steps: 1 };
    let cfg = AgentConfig { hidden: vec![16, 16], log_std_min: -5.0, ..AgentConfig::default() };
    let (mut critic, mut actor, mut sac_actor) = (FdCheck::default(), FdCheck::default(), FdCheck::default());
    for point in 0..20u64 {
        let mut rng = stream(point, Stream::Init, 7);
        let mut ddpg = DdpgAgent::new(&spec, &cfg, &mut rng)?;
        let batch = random_batch(&mut rng, &spec, 8)?;
        let y = ddpg.td_targets(&batch)?;
        let (_, g) = ddpg.critic_loss_and_grad(batch.states.view(), batch.actions.view(), y.view())?;
        critic.merge(fd_check(&g, &ddpg.critic, h, |net| {
            let mut probe = ddpg.clone();
            probe.critic = net.clone();
            ddpg_critic_eval(&probe, &batch, y.view())
        })?);

        // Undo the small-output initialisation so the tanh is exercised.
        ddpg.actor.scale_output_layer(1e3);
        let (_, g) = ddpg.actor_objective_and_grad(batch.states.view())?;
        actor.merge(fd_check(&g, &ddpg.actor, h, |net| {
            let mut probe = ddpg.clone();
            probe.actor = net.clone();
            ddpg_actor_eval(&probe, batch.states.view())
        })?);

        let mut sac = SacAgent::new(&spec, &cfg, &mut rng)?;
        sac.actor.scale_output_layer(1e3);
        let eps = Array2::from_shape_simple_fn((8, spec.action_dim), || StandardNormal.sample(&mut rng));
        let (_, g) = sac.actor_loss_and_grad(batch.states.view(), eps.view())?;
        sac_actor.merge(fd_check(&g, &sac.actor, h, |net| {
            let mut probe = sac.clone();
            probe.actor = net.clone();
            sac_actor_eval(&probe, batch.states.view(), eps.view())
        })?);
    }
    let total_skipped = critic.skipped + actor.skipped + sac_actor.skipped;
    let total = total_skipped + critic.checked + actor.checked + sac_actor.checked;
    // A handful of kink crossings is expected; many would mean the check is
    // not looking at much.
    let coverage_ok = total_skipped * 100 <= total;
    let passed = critic.worst < 1e-4 && actor.worst < 1e-4 && sac_actor.worst < 1e-3 && coverage_ok;
    Ok((
        passed,
        format!(
            "max rel. error: ddpg critic {:.1e}, ddpg actor {:.1e}, sac actor {:.1e} ({} of {} stencils straddled a kink)",
            critic.worst, actor.worst, sac_actor.worst, total_skipped, total
        ),
    ))
}

/// Range, symmetry, identity and scale properties of both metrics on 10⁴
/// random pairs of dimension 1 to 16.
pub fn similarity_suite(hooks: &SelftestHooks) -> Result<(bool, String)> {
    let cosine = hooks.cosine;
    let mut rng = stream(0x51, Stream::Eval, 2);
    let mut failures: Vec<String> = Vec::new();
    for i in 0..10_000 {
        let dim = rng.random_range(1..=16usize);
        let draw = |rng: &mut RunRng| -> Vec<f64> { (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect() };
        let (a, b, c) = (draw(&mut rng), draw(&mut rng), draw(&mut rng));
        let mut fail = |what: &str| {
            if failures.len() < 5 {
                failures.push(format!("pair {i} (dim {dim}): {what}"));
            }
        };

        let m_ab = manhattan_similarity(&a, &b)?;
        if !(m_ab > 0.0 && m_ab <= 1.0) {
            fail("manhattan outside (0, 1]");
        }
        if m_ab != manhattan_similarity(&b, &a)? {
            fail("manhattan asymmetric");
        }
        if manhattan_similarity(&a, &a)? != 1.0 {
            fail("manhattan self-similarity ≠ 1");
        }

        let c_ab = cosine(&a, &b, &c)?;
        if !(-1.0 - 1e-12..=1.0 + 1e-12).contains(&c_ab) {
            fail("cosine outside [−1, 1]");
        }
        if c_ab != cosine(&b, &a, &c)? {
            fail("cosine asymmetric");
        }
        if (cosine(&a, &a, &c)? - 1.0).abs() > 1e-12 {
            fail("cosine self-similarity ≠ 1");
        }
        let k = rng.random_range(0.01..100.0);
        let scale = |v: &[f64]| -> Vec<f64> { v.iter().zip(&c).map(|(x, ci)| ci + k * (x - ci)).collect() };
        if (cosine(&scale(&a), &scale(&b), &c)? - c_ab).abs() > 1e-9 {
            fail("cosine not scale invariant");
        }
    }
    if failures.is_empty() {
        Ok((true, "10000 pairs, zero failures".into()))
    } else {
        Ok((false, failures.join("; ")))
    }
}

/// Closed-loop run of the real gate against a stream whose best similarity
/// is uniform on `[0, 1]`: a single queued state at the origin and a 1-D
/// state at distance `1/u − 1` under the Manhattan metric.
pub fn controller_trace(target: f64, calls: usize, seed: u64) -> Result<Vec<f64>> {
    let mut queue = KeyStateQueue::new(1, 1)?;
    queue.admit([KeyStateEntry { state: vec![0.0], score: 0.0, epoch: 0 }]);
    let cfg = SimilarityConfig { metric: SimilarityMetric::Manhattan, ..SimilarityConfig::default() };
    let mut gate = KeyStateGate::new(cfg, Centering::Zero, 1, 1000, PctAddSchedule::new(target, target, 1)?)?;
    let mut rng = stream(seed, Stream::Eval, 3);
    let mut fractions = Vec::with_capacity(calls);
    for step in 0..calls {
        let u: f64 = 1.0 - rng.random::<f64>();
        gate.decide(&[1.0 / u - 1.0], &queue, step as u64)?;
        fractions.push(gate.window_fraction());
    }
    Ok(fractions)
}

pub fn controller_suite() -> Result<(bool, String)> {
    let mut ok = true;
    let mut notes = Vec::new();
    for target in [0.2, 0.3, 0.4] {
        let trace = controller_trace(target, 5000, 11)?;
        let last = *trace.last().expect("5000 calls");
        let first_in =
            trace.iter().enumerate().skip(999).find(|(_, f)| (*f - target).abs() <= 0.05).map(|(i, _)| i + 1);
        ok &= (last - target).abs() <= 0.05;
        notes.push(format!(
            "target {target}: fraction {last:.3} at call 5000 (first in band at {})",
            first_in.map_or("never".into(), |c| c.to_string())
        ));
    }
    let sched = PctAddSchedule::new(0.4, 0.2, 50_000)?;
    let endpoints =
        pct_add_at(0, &sched) == 0.4 && pct_add_at(50_000, &sched) == 0.2 && pct_add_at(90_000, &sched) == 0.2;
    ok &= endpoints;
    notes.push(format!("schedule endpoints {}", if endpoints { "exact" } else { "WRONG" }));
    Ok((ok, notes.join("; ")))
}

/// Direct evaluation of the clip formula with its sign and zero guard.
pub fn clip_oracle(avg: f64, traj: f64, lower: usize, upper: usize) -> usize {
    if traj.abs() < ZERO_RETURN_EPS || (avg > 0.0 && traj < 0.0) || (avg < 0.0 && traj > 0.0) {
        return upper;
    }
    let v = 20.0 * (avg / traj).powi(2);
    let clipped = if v < lower as f64 {
        lower as f64
    } else if v > upper as f64 {
        upper as f64
    } else {
        v
    };
    clipped.round() as usize
}

pub fn clip_grid() -> Vec<(f64, f64)> {
    let avgs = [-300.0, -100.0, -37.5, -1.0, 0.0, 0.5, 10.0, 55.0, 100.0, 250.0];
    let trajs = [-400.0, -120.0, -60.0, -2.0, 0.0, 1e-13, 3.0, 80.0, 200.0, 1000.0];
    avgs.iter().flat_map(|&a| trajs.iter().map(move |&t| (a, t))).collect()
}

pub fn clip_suite() -> Result<(bool, String)> {
    let mismatches: Vec<String> = clip_grid()
        .into_iter()
        .filter(|&(a, t)| key_state_count(a, t, 5, 20) != clip_oracle(a, t, 5, 20))
        .map(|(a, t)| format!("({a}, {t})"))
        .collect();
    Ok((
        mismatches.is_empty(),
        if mismatches.is_empty() {
            "100 grid points exact".into()
        } else {
            format!("mismatches at {}", mismatches.join(" "))
        },
    ))
}

/// Random admit / resize / clear sequences against a `VecDeque` model.
pub fn queue_model_check(ops: usize, seed: u64) -> Result<Option<String>> {
    let (lower, upper) = (5, 20);
    let mut queue = KeyStateQueue::new(lower, upper)?;
    let mut model: VecDeque<u64> = VecDeque::new();
    let mut cap = upper;
    let mut rng = stream(seed, Stream::Eval, 4);
    let mut next = 0u64;
    for op in 0..ops {
        match rng.random_range(0..10) {
            0..=6 => {
                let k = rng.random_range(0..=6);
                let batch: Vec<KeyStateEntry> = (0..k)
                    .map(|j| KeyStateEntry { state: vec![(next + j) as f64], score: -((next + j) as f64), epoch: op })
                    .collect();
                for j in 0..k {
                    model.push_back(next + j);
                    if model.len() > cap {
                        model.pop_front();
                    }
                }
                next += k;
                queue.admit(batch);
            }
            7..=8 => {
                cap = rng.random_range(lower..=upper);
                queue.resize(cap)?;
                while model.len() > cap {
                    model.pop_front();
                }
            }
            _ => {
                queue.clear();
                model.clear();
            }
        }
        let actual: Vec<u64> = queue.iter().map(|e| e.state[0] as u64).collect();
        if actual != model.iter().copied().collect::<Vec<_>>() || queue.capacity() != cap || queue.len() > cap {
            return Ok(Some(format!("diverged at op {op}: queue {actual:?}, model {model:?}")));
        }
    }
    Ok(None)
}

pub fn queue_suite() -> Result<(bool, String)> {
    Ok(match queue_model_check(100_000, 3)? {
        None => (true, "100000 operations, state-for-state match".into()),
        Some(msg) => (false, msg),
    })
}
