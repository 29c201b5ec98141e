//! Interaction storage: the uniform replay ring, evaluation trajectories, and
//! the bounded first-in-first-out queue of remembered low-return states.

use std::collections::VecDeque;

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// True terminal. Step-limit truncation is stored as `false`.
    pub done: bool,
}

/// Fixed-capacity ring; once full, each push overwrites the oldest entry.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    slots: Vec<Transition>,
    capacity: usize,
    cursor: usize,
    pushed: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("replay capacity", "must be positive"));
        }
        Ok(ReplayBuffer { slots: Vec::with_capacity(capacity.min(1 << 16)), capacity, cursor: 0, pushed: 0 })
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Index of the slot the next push writes to.
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    /// How many times writing has come back around to overwrite slot 0.
    pub fn wraps(&self) -> u64 {
        self.pushed.saturating_sub(1) / self.capacity as u64
    }

    pub fn push(&mut self, t: Transition) {
        if self.slots.len() < self.capacity {
            self.slots.push(t);
        } else {
            self.slots[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        self.pushed += 1;
    }

    /// Contents from oldest to newest.
    pub fn iter_oldest_first(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.slots.len() < self.capacity { 0 } else { self.cursor };
        self.slots[split..].iter().chain(&self.slots[..split])
    }

    /// Draw `n` transitions uniformly with replacement.
    pub fn sample<'a, R: Rng + ?Sized>(&'a self, n: usize, rng: &mut R) -> Result<Vec<&'a Transition>> {
        if self.slots.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        Ok((0..n).map(|_| &self.slots[rng.random_range(0..self.slots.len())]).collect())
    }
}

/// A noise-free evaluation rollout kept for return scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalTrajectory {
    /// `states[t]` is the state in which `rewards[t]` was earned.
    pub states: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    /// State reached after the last step.
    pub final_state: Vec<f64>,
    /// Whether `final_state` is a true terminal (no bootstrap).
    pub terminal: bool,
}

impl EvalTrajectory {
    pub fn new(states: Vec<Vec<f64>>, rewards: Vec<f64>, final_state: Vec<f64>, terminal: bool) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        if states.len() != rewards.len() {
            return Err(Error::shape("trajectory rewards", states.len(), rewards.len()));
        }
        Ok(EvalTrajectory { states, rewards, final_state, terminal })
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Undiscounted episode return.
    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyStateEntry {
    pub state: Vec<f64>,
    /// Bootstrapped discounted return that earned this state its place.
    pub score: f64,
    pub epoch: usize,
}

/// Bounded FIFO of remembered states. Capacity may be resized within
/// `[lower, upper]`; shrinking evicts the oldest entries immediately.
#[derive(Debug, Clone)]
pub struct KeyStateQueue {
    entries: VecDeque<KeyStateEntry>,
    lower: usize,
    upper: usize,
    capacity: usize,
}

impl KeyStateQueue {
    /// A queue whose capacity starts at `upper`.
    pub fn new(lower: usize, upper: usize) -> Result<Self> {
        if lower == 0 || lower > upper {
            return Err(Error::invalid("key-state bounds", format!("need 0 < lower ≤ upper, got [{lower}, {upper}]")));
        }
        Ok(KeyStateQueue { entries: VecDeque::with_capacity(upper), lower, upper, capacity: upper })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn bounds(&self) -> (usize, usize) {
        (self.lower, self.upper)
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &KeyStateEntry> {
        self.entries.iter()
    }

    /// Append `candidates` in order, evicting from the front when over
    /// capacity.
    pub fn admit(&mut self, candidates: impl IntoIterator<Item = KeyStateEntry>) {
        for c in candidates {
            self.entries.push_back(c);
            if self.entries.len() > self.capacity {
                self.entries.pop_front();
            }
        }
    }

    pub fn resize(&mut self, capacity: usize) -> Result<()> {
        if !(self.lower..=self.upper).contains(&capacity) {
            return Err(Error::invalid(
                "key-state capacity",
                format!("{capacity} outside [{}, {}]", self.lower, self.upper),
            ));
        }
        self.capacity = capacity;
        while self.entries.len() > capacity {
            self.entries.pop_front();
        }
        Ok(())
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}
