use crate::error::{Error, Result};

/// The two exploration tiers.
///
/// Additive-noise agents use `small` / `big` as Gaussian standard deviations,
/// as fractions of the action bound. Stochastic-policy agents instead scale
/// their standard deviation range by `scale_up` on key states and
/// `scale_down` elsewhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseTier {
    pub small: f64,
    pub big: f64,
    pub scale_up: f64,
    pub scale_down: f64,
}

impl Default for NoiseTier {
    fn default() -> Self {
        NoiseTier { small: 0.05, big: 0.4, scale_up: 1.5, scale_down: 0.5 }
    }
}

impl NoiseTier {
    pub fn validate(&self) -> Result<()> {
        if !(self.small >= 0.0 && self.big > self.small) {
            return Err(Error::invalid(
                "noise tiers",
                format!("need big > small ≥ 0, got small {} big {}", self.small, self.big),
            ));
        }
        if !(self.scale_up > 0.0 && self.scale_down > 0.0) {
            return Err(Error::invalid("variance scales", "must be positive"));
        }
        Ok(())
    }

    /// The added amount, `big − small`.
    pub fn added(&self) -> f64 {
        self.big - self.small
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    Additive,
    VarianceScale,
}

/// How an action should be perturbed at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exploration {
    /// Standard deviation of Gaussian noise added to a deterministic action.
    Additive(f64),
    /// Multiplier applied to a stochastic policy's standard deviation.
    VarianceScale(f64),
}

pub fn noise_for(is_key: bool, tier: &NoiseTier, mode: NoiseMode) -> Exploration {
    match (mode, is_key) {
        (NoiseMode::Additive, true) => Exploration::Additive(tier.big),
        (NoiseMode::Additive, false) => Exploration::Additive(tier.small),
        (NoiseMode::VarianceScale, true) => Exploration::VarianceScale(tier.scale_up),
        (NoiseMode::VarianceScale, false) => Exploration::VarianceScale(tier.scale_down),
    }
}

/// Exploration used when gating is switched off.
pub fn ungated(tier: &NoiseTier, mode: NoiseMode) -> Exploration {
    match mode {
        NoiseMode::Additive => Exploration::Additive(tier.small),
        NoiseMode::VarianceScale => Exploration::VarianceScale(1.0),
    }
}
