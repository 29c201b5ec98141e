use rand::Rng;

use super::{clamp_action, EnvKind, EnvSpec, Environment, StepResult};
use crate::error::Result;
use crate::rng::RunRng;

const MIN_POSITION: f64 = -1.2;
const MAX_POSITION: f64 = 0.6;
const MAX_SPEED: f64 = 0.07;
const GOAL_POSITION: f64 = 0.45;
const POWER: f64 = 0.0015;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MountainCarState {
    pub position: f64,
    pub velocity: f64,
}

impl MountainCarState {
    pub fn observation(&self) -> Vec<f64> {
        vec![self.position, self.velocity]
    }
}

/// Under-powered car in a valley; reaching the right hilltop pays 100 and
/// ends the episode, every step costs `0.1·u²`.
#[derive(Debug, Clone, Default)]
pub struct MountainCar {
    state: Option<MountainCarState>,
    t: usize,
}

impl MountainCar {
    pub const SPEC: EnvSpec = EnvSpec { state_dim: 2, action_dim: 1, action_bound: 1.0, max_steps: 999 };

    /// Returns the next state, the reward, and whether the goal was reached.
    pub fn dynamics(s: MountainCarState, force: f64) -> (MountainCarState, f64, bool) {
        let velocity = (s.velocity + POWER * force - 0.0025 * (3.0 * s.position).cos()).clamp(-MAX_SPEED, MAX_SPEED);
        let position = (s.position + velocity).clamp(MIN_POSITION, MAX_POSITION);
        let reached = position >= GOAL_POSITION;
        let mut reward = -0.1 * force * force;
        if reached {
            reward += 100.0;
        }
        (MountainCarState { position, velocity }, reward, reached)
    }

    pub fn state(&self) -> Option<MountainCarState> {
        self.state
    }

    pub fn set_state(&mut self, state: MountainCarState) {
        self.state = Some(state);
        self.t = 0;
    }
}

impl Environment for MountainCar {
    fn kind(&self) -> EnvKind {
        EnvKind::MountainCar
    }

    fn spec(&self) -> EnvSpec {
        Self::SPEC
    }

    fn reset(&mut self, rng: &mut RunRng) -> Vec<f64> {
        let s = MountainCarState { position: rng.random_range(-0.6..=-0.4), velocity: 0.0 };
        self.set_state(s);
        s.observation()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        let a = clamp_action(action, &Self::SPEC)?;
        let s = self.state.expect("reset before step");
        let (next, reward, reached) = Self::dynamics(s, a[0]);
        self.state = Some(next);
        self.t += 1;
        Ok(StepResult {
            next_state: next.observation(),
            reward,
            done: reached || self.t >= Self::SPEC.max_steps,
            terminal: reached,
        })
    }

    fn elapsed(&self) -> usize {
        self.t
    }
}
