use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Centered norms below this make the cosine undefined; it is reported as 0.
pub const DEGENERATE_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimilarityMetric {
    Cosine,
    Manhattan,
}

impl SimilarityMetric {
    pub fn name(self) -> &'static str {
        match self {
            SimilarityMetric::Cosine => "cosine",
            SimilarityMetric::Manhattan => "manhattan",
        }
    }

    pub fn similarity(self, a: &[f64], b: &[f64], center: &[f64]) -> Result<f64> {
        match self {
            SimilarityMetric::Cosine => cosine_similarity(a, b, center),
            SimilarityMetric::Manhattan => manhattan_similarity(a, b),
        }
    }
}

impl fmt::Display for SimilarityMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SimilarityMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(SimilarityMetric::Cosine),
            "manhattan" => Ok(SimilarityMetric::Manhattan),
            other => Err(Error::Config {
                key: "metric".into(),
                reason: format!("unknown metric `{other}` (expected cosine or manhattan)"),
            }),
        }
    }
}

fn same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::shape("similarity operands", a.len(), b.len()));
    }
    Ok(())
}

/// `1 / (1 + Σ|a_k − b_k|)`, in `(0, 1]`.
pub fn manhattan_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    same_len(a, b)?;
    let l1: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
    Ok(1.0 / (1.0 + l1))
}

/// Cosine of the angle between `a − center` and `b − center`.
///
/// Returns 0 when either centered vector has norm below
/// [`DEGENERATE_NORM`].
pub fn cosine_similarity(a: &[f64], b: &[f64], center: &[f64]) -> Result<f64> {
    same_len(a, b)?;
    same_len(a, center)?;
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for ((x, y), c) in a.iter().zip(b).zip(center) {
        let (u, v) = (x - c, y - c);
        dot += u * v;
        na += u * u;
        nb += v * v;
    }
    let (na, nb) = (na.sqrt(), nb.sqrt());
    if na < DEGENERATE_NORM || nb < DEGENERATE_NORM {
        return Ok(0.0);
    }
    Ok(dot / (na * nb))
}

/// Incremental mean of every state seen so far.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningMean {
    mean: Vec<f64>,
    count: u64,
}

impl RunningMean {
    pub fn new(dim: usize) -> Self {
        RunningMean { mean: vec![0.0; dim], count: 0 }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// `mean ← mean + (x − mean)/n`.
    pub fn update(&mut self, x: &[f64]) -> Result<()> {
        same_len(&self.mean, x)?;
        self.count += 1;
        let n = self.count as f64;
        for (m, v) in self.mean.iter_mut().zip(x) {
            *m += (v - *m) / n;
        }
        Ok(())
    }
}
