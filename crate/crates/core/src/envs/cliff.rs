use super::{clamp_action, EnvKind, EnvSpec, Environment, StepResult};
use crate::error::Result;
use crate::rng::RunRng;

const DT: f64 = 0.05;
const MAX_SPEED: f64 = 1.0;
const GOAL: (f64, f64) = (1.0, 1.0);
const GOAL_RADIUS: f64 = 0.1;
const STRIP_X: (f64, f64) = (0.4, 0.6);
const STRIP_TOP: f64 = 0.5;
pub(crate) const STRIP_PENALTY: f64 = -10.0;
const GOAL_REWARD: f64 = 100.0;

/// Position and velocity of the point mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CliffState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

impl CliffState {
    pub fn observation(&self) -> Vec<f64> {
        vec![self.x, self.y, self.vx, self.vy]
    }

    fn in_strip(&self) -> bool {
        (STRIP_X.0..=STRIP_X.1).contains(&self.x) && self.y <= STRIP_TOP
    }

    fn goal_distance(&self) -> f64 {
        (self.x - GOAL.0).hypot(self.y - GOAL.1)
    }
}

/// L∞ distance from `(x, y)` to the penalty strip `{0.4 ≤ x ≤ 0.6, y ≤ 0.5}`.
pub fn linf_distance_to_strip(x: f64, y: f64) -> f64 {
    let dx = (STRIP_X.0 - x).max(x - STRIP_X.1).max(0.0);
    let dy = (y - STRIP_TOP).max(0.0);
    dx.max(dy)
}

/// A point mass in the unit square that must travel from the origin to a goal
/// disc at (1, 1) past a penalty strip rising from the bottom wall.
#[derive(Debug, Clone, Default)]
pub struct CliffField {
    state: Option<CliffState>,
    t: usize,
}

impl CliffField {
    pub const SPEC: EnvSpec = EnvSpec { state_dim: 4, action_dim: 2, action_bound: 1.0, max_steps: 400 };

    /// Returns the next state, its reward, and whether the goal was reached.
    pub fn dynamics(s: CliffState, accel: [f64; 2]) -> (CliffState, f64, bool) {
        let vx = (s.vx + accel[0] * DT).clamp(-MAX_SPEED, MAX_SPEED);
        let vy = (s.vy + accel[1] * DT).clamp(-MAX_SPEED, MAX_SPEED);
        let next = CliffState { x: (s.x + vx * DT).clamp(0.0, 1.0), y: (s.y + vy * DT).clamp(0.0, 1.0), vx, vy };
        let dist = next.goal_distance();
        if dist <= GOAL_RADIUS {
            (next, GOAL_REWARD, true)
        } else if next.in_strip() {
            (next, STRIP_PENALTY, false)
        } else {
            (next, -0.1 * dist, false)
        }
    }

    pub fn state(&self) -> Option<CliffState> {
        self.state
    }

    pub fn set_state(&mut self, state: CliffState) {
        self.state = Some(state);
        self.t = 0;
    }
}

impl Environment for CliffField {
    fn kind(&self) -> EnvKind {
        EnvKind::Cliff
    }

    fn spec(&self) -> EnvSpec {
        Self::SPEC
    }

    fn reset(&mut self, _rng: &mut RunRng) -> Vec<f64> {
        let s = CliffState { x: 0.0, y: 0.0, vx: 0.0, vy: 0.0 };
        self.set_state(s);
        s.observation()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        let a = clamp_action(action, &Self::SPEC)?;
        let s = self.state.expect("reset before step");
        let (next, reward, reached) = Self::dynamics(s, [a[0], a[1]]);
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
