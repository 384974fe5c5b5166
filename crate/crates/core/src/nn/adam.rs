use serde::{Deserialize, Serialize};

use crate::nn::network::{Gradients, NetworkParams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

/// First and second moment accumulators for one network.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    first: Gradients,
    second: Gradients,
    step: u64,
}

impl AdamState {
    pub fn new(params: &NetworkParams, config: AdamConfig) -> Self {
        Self {
            config,
            first: Gradients::zeros_like(params),
            second: Gradients::zeros_like(params),
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update. Parameters are left untouched when any
/// gradient entry is non-finite.
pub fn adam_step(
    params: &mut NetworkParams,
    grads: &Gradients,
    state: &mut AdamState,
) -> Result<()> {
    grads.check_conforms(params)?;
    state.first.check_conforms(params)?;
    if let Some(layer) = grads.first_non_finite_layer() {
        return Err(Error::Numeric {
            layer,
            what: "gradient entry".into(),
        });
    }
    state.step += 1;
    let AdamConfig {
        learning_rate,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
    };
    for l in 0..params.layer_count() {
        let g_w = &grads.weights[l];
        let (m_w, v_w) = (&mut state.first.weights[l], &mut state.second.weights[l]);
        for (((p, &g), m), v) in params
            .weight_mut(l)
            .iter_mut()
            .zip(g_w.iter())
            .zip(m_w.iter_mut())
            .zip(v_w.iter_mut())
        {
            update(p, g, m, v);
        }
        let g_b = &grads.biases[l];
        let (m_b, v_b) = (&mut state.first.biases[l], &mut state.second.biases[l]);
        for (((p, &g), m), v) in params
            .bias_mut(l)
            .iter_mut()
            .zip(g_b.iter())
            .zip(m_b.iter_mut())
            .zip(v_b.iter_mut())
        {
            update(p, g, m, v);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init_network;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut net = init_network(&[3, 4, 2], 1).unwrap();
        let before = net.clone();
        let mut state = AdamState::new(&net, AdamConfig::default());
        adam_step(&mut net, &Gradients::zeros_like(&before), &mut state).unwrap();
        assert_eq!(net, before);
        assert_eq!(state.step(), 1);
    }

    #[test]
    fn constant_gradient_moves_against_sign() {
        let mut net = init_network(&[2, 2, 1], 3).unwrap();
        let before = net.clone();
        let mut g = Gradients::zeros_like(&net);
        g.weights[0][(0, 0)] = 0.7;
        g.weights[1][(0, 1)] = -0.2;
        let mut state = AdamState::new(&net, AdamConfig::default());
        for _ in 0..100 {
            adam_step(&mut net, &g, &mut state).unwrap();
        }
        assert!(net.weight(0)[(0, 0)] < before.weight(0)[(0, 0)]);
        assert!(net.weight(1)[(0, 1)] > before.weight(1)[(0, 1)]);
        assert_eq!(net.weight(0)[(1, 1)], before.weight(0)[(1, 1)]);
    }

    #[test]
    fn scalar_quadratic_converges() {
        // Minimize (w - 3)^2 over the single weight of the output layer.
        let mut net = init_network(&[1, 1, 1], 0).unwrap();
        let mut state = AdamState::new(&net, AdamConfig::with_learning_rate(1e-2));
        let mut converged_at = None;
        for step in 1..=5000 {
            let w = net.weight(1)[(0, 0)];
            let mut g = Gradients::zeros_like(&net);
            g.weights[1][(0, 0)] = 2.0 * (w - 3.0);
            adam_step(&mut net, &g, &mut state).unwrap();
            if (net.weight(1)[(0, 0)] - 3.0).abs() < 1e-6 && converged_at.is_none() {
                converged_at = Some(step);
            }
        }
        assert!(converged_at.is_some());
        assert!((net.weight(1)[(0, 0)] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn non_finite_gradient_names_layer() {
        let mut net = init_network(&[2, 3, 1], 0).unwrap();
        let mut g = Gradients::zeros_like(&net);
        g.biases[1][0] = f64::NAN;
        let mut state = AdamState::new(&net, AdamConfig::default());
        let before = net.clone();
        let err = adam_step(&mut net, &g, &mut state).unwrap_err();
        assert!(matches!(err, Error::Numeric { layer: 1, .. }));
        assert_eq!(net, before);
        assert_eq!(state.step(), 0);
    }
}
