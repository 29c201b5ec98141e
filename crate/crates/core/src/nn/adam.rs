use crate::error::{Error, Result};

use super::mlp::{check_same_shape, GradientBundle, Mlp};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig { lr, ..AdamConfig::default() }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Moment accumulators for one network, shaped exactly like its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    first: GradientBundle,
    second: GradientBundle,
}

impl AdamState {
    pub fn new(net: &Mlp, config: AdamConfig) -> Self {
        AdamState { config, step: 0, first: GradientBundle::zeros_like(net), second: GradientBundle::zeros_like(net) }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &GradientBundle {
        &self.first
    }

    pub fn second_moment(&self) -> &GradientBundle {
        &self.second
    }

    /// One bias-corrected Adam descent step on `net`.
    ///
    /// A gradient containing NaN or infinity is rejected before any state is
    /// touched, so the network and the moments stay as they were.
    pub fn apply(&mut self, net: &mut Mlp, grads: &GradientBundle) -> Result<()> {
        check_same_shape(net.layers(), &grads.layers, "adam gradient")?;
        check_same_shape(net.layers(), &self.first.layers, "adam state")?;
        if let Some((i, v)) = grads.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "adam gradient",
                detail: format!(
                    "parameter {i} has gradient {v} (step {}, max |g| {})",
                    self.step,
                    grads.iter().filter(|g| g.is_finite()).fold(0.0, |m: f64, g| m.max(g.abs()))
                ),
            });
        }

        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bias1 = 1.0 - beta1.powi(self.step as i32);
        let bias2 = 1.0 - beta2.powi(self.step as i32);

        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        };

        for (((layer, g), m), v) in
            net.layers_mut().iter_mut().zip(&grads.layers).zip(&mut self.first.layers).zip(&mut self.second.layers)
        {
            ndarray::Zip::from(&mut layer.weights)
                .and(&g.weights)
                .and(&mut m.weights)
                .and(&mut v.weights)
                .for_each(|p, &g, m, v| update(p, g, m, v));
            ndarray::Zip::from(&mut layer.bias)
                .and(&g.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }

        if !net.is_finite() {
            return Err(Error::NonFinite {
                context: "adam update",
                detail: format!("parameters became non-finite at step {}", self.step),
            });
        }
        Ok(())
    }
}

/// Polyak averaging: `target ← tau·online + (1 − tau)·target`.
pub fn soft_update(target: &mut Mlp, online: &Mlp, tau: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::invalid("tau", format!("{tau} is outside [0, 1]")));
    }
    check_same_shape(target.layers(), online.layers(), "soft update")?;
    let keep = 1.0 - tau;
    for (t, o) in target.layers_mut().iter_mut().zip(online.layers()) {
        ndarray::Zip::from(&mut t.weights).and(&o.weights).for_each(|t, &o| *t = tau * o + keep * *t);
        ndarray::Zip::from(&mut t.bias).and(&o.bias).for_each(|t, &o| *t = tau * o + keep * *t);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Dense, OutputActivation};
    use crate::rng::{stream, Stream};
    use ndarray::array;
    use proptest::prelude::*;

    fn scalar_net(w: f64) -> Mlp {
        let layer = Dense { weights: array![[w]], bias: array![0.0] };
        Mlp::from_layers(vec![layer], Activation::Relu, OutputActivation::Identity).unwrap()
    }

    fn grad_of(g: f64) -> GradientBundle {
        GradientBundle { layers: vec![Dense { weights: array![[g]], bias: array![0.0] }] }
    }

    fn random_net(seed: u64) -> Mlp {
        let mut rng = stream(seed, Stream::Init, 0);
        Mlp::new(&[3, 5, 2], Activation::Relu, OutputActivation::Identity, &mut rng).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut net = random_net(1);
        let before = net.clone();
        let mut adam = AdamState::new(&net, AdamConfig::default());
        let zero = GradientBundle::zeros_like(&net);
        for _ in 0..5 {
            adam.apply(&mut net, &zero).unwrap();
        }
        assert_eq!(net, before);
        assert_eq!(adam.steps(), 5);
    }

    #[test]
    fn moments_decay_under_zero_gradient() {
        let mut net = scalar_net(1.0);
        let mut adam = AdamState::new(&net, AdamConfig::default());
        adam.apply(&mut net, &grad_of(1.0)).unwrap();
        let m0 = adam.first_moment().layers[0].weights[[0, 0]];
        let v0 = adam.second_moment().layers[0].weights[[0, 0]];
        adam.apply(&mut net, &grad_of(0.0)).unwrap();
        let m1 = adam.first_moment().layers[0].weights[[0, 0]];
        let v1 = adam.second_moment().layers[0].weights[[0, 0]];
        assert!(m1.abs() < m0.abs() && v1 < v0);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        for g in [3.0, -0.02, 150.0] {
            let mut net = scalar_net(0.0);
            let mut adam = AdamState::new(&net, AdamConfig::with_lr(0.01));
            adam.apply(&mut net, &grad_of(g)).unwrap();
            let moved = net.param(0);
            assert!((moved + 0.01 * f64::signum(g)).abs() < 1e-8, "g={g}: {moved}");
        }
    }

    #[test]
    fn quadratic_matches_reference_recurrence() {
        // Reference: textbook scalar Adam on f(θ) = θ².
        let (lr, b1, b2, eps) = (0.1, 0.9, 0.999, 1e-8);
        let (mut theta, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        for t in 1..=100 {
            let g = 2.0 * theta;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t));
            let vh = v / (1.0 - b2.powi(t));
            theta -= lr * mh / (vh.sqrt() + eps);
        }
        assert!(theta.abs() < 0.1);

        let mut net = scalar_net(1.0);
        let mut adam = AdamState::new(&net, AdamConfig::with_lr(0.1));
        for _ in 0..100 {
            let g = 2.0 * net.param(0);
            adam.apply(&mut net, &grad_of(g)).unwrap();
        }
        assert!((net.param(0) - theta).abs() < 1e-12);
        assert!(net.param(0).abs() < 0.1);
    }

    #[test]
    fn non_finite_gradient_is_rejected_without_side_effects() {
        let mut net = scalar_net(0.5);
        let mut adam = AdamState::new(&net, AdamConfig::default());
        let before = (net.clone(), adam.clone());
        let err = adam.apply(&mut net, &grad_of(f64::NAN)).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
        assert_eq!((net, adam), before);
    }

    #[test]
    fn soft_update_endpoints() {
        let online = random_net(2);
        let mut target = random_net(3);
        let untouched = target.clone();
        soft_update(&mut target, &online, 0.0).unwrap();
        assert_eq!(target, untouched);
        soft_update(&mut target, &online, 1.0).unwrap();
        assert_eq!(target, online);
    }

    #[test]
    fn soft_update_halfway() {
        let mut target = scalar_net(0.0);
        soft_update(&mut target, &scalar_net(2.0), 0.5).unwrap();
        assert_eq!(target.param(0), 1.0);
    }

    #[test]
    fn soft_update_rejects_bad_tau() {
        let online = random_net(2);
        let mut target = random_net(3);
        assert!(soft_update(&mut target, &online, 1.5).is_err());
        assert!(soft_update(&mut target, &online, -0.1).is_err());
    }

    proptest! {
        #[test]
        fn two_soft_updates_compose(tau in 0.0f64..=1.0, seed in 0u64..1000) {
            let online = random_net(seed);
            let start = random_net(seed + 1);
            let mut twice = start.clone();
            soft_update(&mut twice, &online, tau).unwrap();
            soft_update(&mut twice, &online, tau).unwrap();
            let mut once = start;
            soft_update(&mut once, &online, 1.0 - (1.0 - tau).powi(2)).unwrap();
            for (a, b) in twice.params().zip(once.params()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
