use std::fmt::Write as _;
use std::path::Path;

use crate::agents::Algo;
use crate::envs::EnvKind;
use crate::error::{Error, Result};

pub const METRICS_HEADER: &str = "run_id,seed,env,algo,an2n,epoch,step,eval_return_mean,eval_return_std,\
key_fraction,sim_threshold,fifo_len,critic_loss,wall_ms";

/// One evaluation epoch of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub run_id: String,
    pub seed: u64,
    pub env: EnvKind,
    pub algo: Algo,
    pub an2n: bool,
    /// 1-based.
    pub epoch: u64,
    /// Environment steps taken when the evaluation ran.
    pub step: u64,
    pub eval_return_mean: f64,
    pub eval_return_std: f64,
    /// Share of this epoch's steps that received the big-noise tier.
    pub key_fraction: f64,
    pub sim_threshold: f64,
    pub fifo_len: usize,
    /// Mean critic loss over the epoch's updates, 0 when there were none.
    pub critic_loss: f64,
    pub wall_ms: u64,
}

impl MetricsRecord {
    /// Name of the (algo, an2n) combination, e.g. `ddpg+an2n`.
    pub fn arm(&self) -> String {
        arm_name(self.algo, self.an2n)
    }
}

pub fn arm_name(algo: Algo, an2n: bool) -> String {
    if an2n {
        format!("{algo}+an2n")
    } else {
        algo.to_string()
    }
}

/// Render records as CSV. Floats use Rust's shortest round-trip formatting,
/// which does not depend on locale.
pub fn metrics_to_csv(records: &[MetricsRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.run_id,
            r.seed,
            r.env,
            r.algo,
            if r.an2n { "on" } else { "off" },
            r.epoch,
            r.step,
            r.eval_return_mean,
            r.eval_return_std,
            r.key_fraction,
            r.sim_threshold,
            r.fifo_len,
            r.critic_loss,
            r.wall_ms
        );
    }
    out
}

pub fn write_metrics(records: &[MetricsRecord], path: &Path) -> Result<()> {
    std::fs::write(path, metrics_to_csv(records)).map_err(|e| Error::io(path, e))
}

fn field<T: std::str::FromStr>(line: usize, name: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Parse { context: format!("metrics line {line}"), reason: format!("bad {name} `{value}`") })
}

pub fn parse_metrics(text: &str) -> Result<Vec<MetricsRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == METRICS_HEADER => {}
        other => {
            return Err(Error::Parse {
                context: "metrics header".into(),
                reason: format!("expected `{METRICS_HEADER}`, got `{}`", other.unwrap_or("")),
            })
        }
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let n = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.trim_end().split(',').collect();
        if f.len() != 14 {
            return Err(Error::Parse {
                context: format!("metrics line {n}"),
                reason: format!("expected 14 fields, got {}", f.len()),
            });
        }
        let an2n = match f[4] {
            "on" => true,
            "off" => false,
            other => {
                return Err(Error::Parse {
                    context: format!("metrics line {n}"),
                    reason: format!("bad an2n `{other}`"),
                })
            }
        };
        records.push(MetricsRecord {
            run_id: f[0].to_string(),
            seed: field(n, "seed", f[1])?,
            env: f[2].parse().map_err(|_| Error::Parse {
                context: format!("metrics line {n}"),
                reason: format!("bad env `{}`", f[2]),
            })?,
            algo: f[3].parse().map_err(|_| Error::Parse {
                context: format!("metrics line {n}"),
                reason: format!("bad algo `{}`", f[3]),
            })?,
            an2n,
            epoch: field(n, "epoch", f[5])?,
            step: field(n, "step", f[6])?,
            eval_return_mean: field(n, "eval_return_mean", f[7])?,
            eval_return_std: field(n, "eval_return_std", f[8])?,
            key_fraction: field(n, "key_fraction", f[9])?,
            sim_threshold: field(n, "sim_threshold", f[10])?,
            fifo_len: field(n, "fifo_len", f[11])?,
            critic_loss: field(n, "critic_loss", f[12])?,
            wall_ms: field(n, "wall_ms", f[13])?,
        });
    }
    Ok(records)
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_metrics(&text).map_err(|e| match e {
        Error::Parse { context, reason } => Error::Parse { context: format!("{}: {context}", path.display()), reason },
        other => other,
    })
}
