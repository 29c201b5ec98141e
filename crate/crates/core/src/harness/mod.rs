//! Experiment orchestration: configuration, seeded training runs with
//! per-epoch evaluation, metrics files, reports, and the built-in oracle
//! suites.

mod config;
mod metrics;
mod report;
pub mod selftest;
mod train;

pub use config::{QueueSizing, RunConfig};
pub use metrics::{
    arm_name, metrics_to_csv, parse_metrics, read_metrics, write_metrics, MetricsRecord, METRICS_HEADER,
};
pub use report::{build_report, collect_metrics, curves_svg, summary_csv, write_report, Curve, Report, SummaryRow};
pub use train::{
    evaluate, random_policy_returns, rollout_episodes, run_training, run_training_observed, EvalOutcome, RunObserver,
};
