//! Adam with bias correction and L2 weight decay folded into the gradient.
//!
//! ```text
//! g' = g + weight_decay · p
//! m  = β1 m + (1 − β1) g'
//! v  = β2 v + (1 − β2) g'²
//! p  = p − lr · m̂ / (√v̂ + ε),   m̂ = m / (1 − β1^t),  v̂ = v / (1 − β2^t)
//! ```

use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AdamState {
    pub step: u64,
    pub first: Vec<Matrix>,
    pub second: Vec<Matrix>,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(params: &[Matrix], config: AdamConfig) -> Self {
        let zeros: Vec<Matrix> = params
            .iter()
            .map(|p| Matrix::zeros(p.rows(), p.cols()))
            .collect();
        Self {
            step: 0,
            first: zeros.clone(),
            second: zeros,
            config,
        }
    }
}

/// One optimiser update of `params` in place.
pub fn adam_step(params: &mut [Matrix], grads: &[Matrix], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first.len() {
        return Err(Error::contract(format!(
            "adam: {} params, {} grads, {} moment slots",
            params.len(),
            grads.len(),
            state.first.len()
        )));
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&state.first) {
        if p.shape() != g.shape() {
            return Err(p.mismatch("adam_step", g));
        }
        if p.shape() != m.shape() {
            return Err(p.mismatch("adam_step moments", m));
        }
    }

    state.step += 1;
    let AdamConfig {
        lr,
        beta1,
        beta2,
        eps,
        weight_decay,
    } = state.config;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);

    for (((p, g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(&mut state.first)
        .zip(&mut state.second)
    {
        let slots = p
            .as_mut_slice()
            .iter_mut()
            .zip(g.as_slice())
            .zip(m.as_mut_slice())
            .zip(v.as_mut_slice());
        for (((pv, &gv), mv), vv) in slots {
            let g_eff = gv + weight_decay * *pv;
            *mv = beta1 * *mv + (1.0 - beta1) * g_eff;
            *vv = beta2 * *vv + (1.0 - beta2) * g_eff * g_eff;
            let m_hat = *mv / c1;
            let v_hat = *vv / c2;
            *pv -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Rescales `grads` so their joint L2 norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_global_norm(grads: &mut [Matrix], max_norm: f64) -> f64 {
    let norm = grads.iter().map(Matrix::squared_norm).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        for g in grads.iter_mut() {
            g.as_mut_slice().iter_mut().for_each(|v| *v *= s);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Matrix {
        Matrix::filled(1, 1, v)
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut params = vec![Matrix::from_rows(&[[1.0, -2.0]])];
        let before = params.clone();
        let mut st = AdamState::new(&params, AdamConfig::default());
        adam_step(&mut params, &[Matrix::zeros(1, 2)], &mut st).unwrap();
        assert_eq!(params, before);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut params = vec![scalar(0.5)];
        let mut st = AdamState::new(&params, AdamConfig::default());
        adam_step(&mut params, &[scalar(1.0)], &mut st).unwrap();
        let delta = params[0][(0, 0)] - 0.5;
        assert!((delta + 0.01).abs() < 1e-9, "{delta}");
    }

    #[test]
    fn weight_decay_alone_moves_by_learning_rate() {
        let cfg = AdamConfig {
            weight_decay: 2e-4,
            ..AdamConfig::default()
        };
        let mut params = vec![scalar(1.0)];
        let mut st = AdamState::new(&params, cfg);
        adam_step(&mut params, &[scalar(0.0)], &mut st).unwrap();
        let delta = params[0][(0, 0)] - 1.0;
        // m̂/√v̂ = 2e-4 / (2e-4 + 1e-8)
        assert!((delta + 0.01 * 2e-4 / (2e-4 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut params = vec![Matrix::zeros(2, 2)];
        let mut st = AdamState::new(&params, AdamConfig::default());
        assert!(adam_step(&mut params, &[Matrix::zeros(2, 1)], &mut st).is_err());
        assert_eq!(st.step, 0);
    }

    #[test]
    fn clipping_caps_norm() {
        let mut g = vec![Matrix::from_rows(&[[3.0, 4.0]])];
        let n = clip_global_norm(&mut g, 1.0);
        assert_eq!(n, 5.0);
        assert!((g[0].squared_norm().sqrt() - 1.0).abs() < 1e-15);
        let mut small = vec![scalar(0.1)];
        clip_global_norm(&mut small, 1.0);
        assert_eq!(small[0][(0, 0)], 0.1);
    }
}
