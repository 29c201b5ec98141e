//! Dense networks with hand-written reverse-mode gradients, Adam, and
//! Polyak target tracking.

mod adam;
mod mlp;
pub mod snapshot;

pub use adam::{soft_update, AdamConfig, AdamState};
pub use mlp::{Activation, Backprop, Dense, ForwardCache, GradientBundle, Mlp, OutputActivation};
