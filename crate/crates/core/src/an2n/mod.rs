//! Similarity-gated two-tier exploration.
//!
//! After each evaluation the lowest-return states of a rollout are scored and
//! remembered; during interaction the gate compares the current state with
//! them and chooses the large or small perturbation tier.

mod gate;
mod noise;
mod returns;
mod similarity;

pub use gate::{
    adapt_threshold, gate, pct_add_at, Centering, GateDecision, KeyFractionWindow, KeyStateGate, PctAddSchedule,
    SimilarityConfig,
};
pub use noise::{noise_for, ungated, Exploration, NoiseMode, NoiseTier};
pub use returns::{key_state_count, score_returns, score_trajectory, select_worst, Discount, ZERO_RETURN_EPS};
pub use similarity::{cosine_similarity, manhattan_similarity, RunningMean, SimilarityMetric, DEGENERATE_NORM};
