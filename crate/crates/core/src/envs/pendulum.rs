use std::f64::consts::PI;

use rand::Rng;

use super::{clamp_action, EnvKind, EnvSpec, Environment, StepResult};
use crate::error::Result;
use crate::rng::RunRng;

const GRAVITY: f64 = 10.0;
const MASS: f64 = 1.0;
const LENGTH: f64 = 1.0;
const DT: f64 = 0.05;
const MAX_SPEED: f64 = 8.0;
const MAX_TORQUE: f64 = 2.0;

/// Wrap an angle into `(−π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let w = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// Angle measured from upright, and angular velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumState {
    pub theta: f64,
    pub theta_dot: f64,
}

impl PendulumState {
    pub fn observation(&self) -> Vec<f64> {
        vec![self.theta.cos(), self.theta.sin(), self.theta_dot]
    }
}

/// Torque-limited swing-up. Reward is the negative quadratic cost of the
/// current angle, speed and torque; episodes run to the step limit.
#[derive(Debug, Clone, Default)]
pub struct Pendulum {
    state: Option<PendulumState>,
    t: usize,
}

impl Pendulum {
    pub const SPEC: EnvSpec = EnvSpec { state_dim: 3, action_dim: 1, action_bound: MAX_TORQUE, max_steps: 200 };

    pub fn dynamics(s: PendulumState, torque: f64) -> (PendulumState, f64) {
        let th = wrap_angle(s.theta);
        let cost = th * th + 0.1 * s.theta_dot * s.theta_dot + 0.001 * torque * torque;
        let theta_dot = (s.theta_dot
            + (3.0 * GRAVITY / (2.0 * LENGTH)) * s.theta.sin() * DT
            + (3.0 / (MASS * LENGTH * LENGTH)) * torque * DT)
            .clamp(-MAX_SPEED, MAX_SPEED);
        let theta = s.theta + theta_dot * DT;
        (PendulumState { theta, theta_dot }, -cost)
    }

    pub fn state(&self) -> Option<PendulumState> {
        self.state
    }

    pub fn set_state(&mut self, state: PendulumState) {
        self.state = Some(state);
        self.t = 0;
    }
}

impl Environment for Pendulum {
    fn kind(&self) -> EnvKind {
        EnvKind::Pendulum
    }

    fn spec(&self) -> EnvSpec {
        Self::SPEC
    }

    fn reset(&mut self, rng: &mut RunRng) -> Vec<f64> {
        let s = PendulumState { theta: rng.random_range(-PI..=PI), theta_dot: rng.random_range(-1.0..=1.0) };
        self.set_state(s);
        s.observation()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        let a = clamp_action(action, &Self::SPEC)?;
        let s = self.state.expect("reset before step");
        let (next, reward) = Self::dynamics(s, a[0]);
        self.state = Some(next);
        self.t += 1;
        Ok(StepResult { next_state: next.observation(), reward, done: self.t >= Self::SPEC.max_steps, terminal: false })
    }

    fn elapsed(&self) -> usize {
        self.t
    }
}
