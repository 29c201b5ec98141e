//! Similarity-gated exploration for off-policy actor-critic agents.
//!
//! Past evaluation trajectories are scored by bootstrapped discounted return,
//! the lowest-scoring states are remembered in a bounded queue, and during
//! interaction any state that looks like a remembered one receives a larger
//! action perturbation. The crate contains everything needed to run that
//! loop end to end: networks ([`nn`]), environments ([`envs`]), storage
//! ([`replay`]), the gate itself ([`an2n`]), DDPG and SAC learners
//! ([`agents`]) and the experiment harness ([`harness`]).

pub mod agents;
pub mod an2n;
pub mod envs;
pub mod error;
pub mod harness;
pub mod nn;
pub mod replay;
pub mod rng;

pub use error::{Error, Result};
pub use nn::{Activation, AdamConfig, AdamState, GradientBundle, Mlp, OutputActivation};
pub use replay::{EvalTrajectory, KeyStateEntry, KeyStateQueue, ReplayBuffer, Transition};
