use alloc::vec;
use alloc::vec::Vec;

use super::params::RecurrentParams;
use crate::error::{check_len, Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global L2-norm clip applied before the moment update; `None` disables.
    pub clip: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip: Some(1.0),
        }
    }
}

/// Adam with bias correction and global-norm gradient clipping.
#[derive(Debug, Clone)]
pub struct Adam<S> {
    pub config: AdamConfig,
    m: Vec<S>,
    v: Vec<S>,
    step: u64,
    beta1_pow: f64,
    beta2_pow: f64,
}

impl<S: Scalar> Adam<S> {
    pub fn new(config: AdamConfig, len: usize) -> Self {
        Adam {
            config,
            m: vec![S::ZERO; len],
            v: vec![S::ZERO; len],
            step: 0,
            beta1_pow: 1.0,
            beta2_pow: 1.0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update. Returns the gradient norm before clipping.
    pub fn update(&mut self, params: &mut RecurrentParams<S>, grad: &RecurrentParams<S>) -> Result<f64> {
        check_len("adam gradient", params.len(), grad.len())?;
        check_len("adam state", self.m.len(), grad.len())?;
        let norm = libm::sqrt(grad.as_slice().iter().map(|g| g.to_f64() * g.to_f64()).sum::<f64>());
        if !norm.is_finite() {
            return Err(Error::Numeric("non-finite gradient".into()));
        }
        let scale = match self.config.clip {
            Some(c) if norm > c => S::from_f64(c / norm),
            _ => S::ONE,
        };
        self.step += 1;
        self.beta1_pow *= self.config.beta1;
        self.beta2_pow *= self.config.beta2;
        let b1 = S::from_f64(self.config.beta1);
        let b2 = S::from_f64(self.config.beta2);
        let c1 = S::from_f64(1.0 - self.beta1_pow);
        let c2 = S::from_f64(1.0 - self.beta2_pow);
        let lr = S::from_f64(self.config.lr);
        let eps = S::from_f64(self.config.eps);
        for (((p, &g), m), v) in params
            .as_mut_slice()
            .iter_mut()
            .zip(grad.as_slice())
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            let g = g * scale;
            *m = b1 * *m + (S::ONE - b1) * g;
            *v = b2 * *v + (S::ONE - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(norm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::{CellKind, Direction, Shape};

    fn params() -> RecurrentParams<f64> {
        RecurrentParams::init(
            Shape {
                kind: CellKind::Rnn,
                direction: Direction::Forward,
                input_dim: 2,
                hidden_dim: 2,
                classes: 2,
            },
            1,
        )
        .unwrap()
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = params();
        let before = p.clone();
        let mut opt = Adam::new(AdamConfig::default(), p.len());
        let g = p.zeros_like();
        for _ in 0..5 {
            opt.update(&mut p, &g).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn constant_gradient_moves_lr_per_step() {
        let mut p = params();
        let before = p.clone();
        let cfg = AdamConfig {
            clip: None,
            ..AdamConfig::default()
        };
        let mut opt = Adam::new(cfg, p.len());
        let mut g = p.zeros_like();
        for (i, v) in g.as_mut_slice().iter_mut().enumerate() {
            *v = if i % 2 == 0 { 0.3 } else { -2.0 };
        }
        let k = 50;
        for _ in 0..k {
            opt.update(&mut p, &g).unwrap();
        }
        for ((a, b), gv) in p.as_slice().iter().zip(before.as_slice()).zip(g.as_slice()) {
            let moved = a - b;
            let want = -cfg.lr * gv.signum() * k as f64;
            assert!((moved - want).abs() < 1e-6 * k as f64, "{moved} vs {want}");
        }
    }

    #[test]
    fn clipping_caps_applied_norm() {
        let p = params();
        let mut g = p.zeros_like();
        let n = g.len() as f64;
        for v in g.as_mut_slice() {
            *v = 10.0 / libm::sqrt(n);
        }
        // with beta1 = 0 the first moment is exactly the applied gradient
        let cfg = AdamConfig {
            beta1: 0.0,
            clip: Some(1.0),
            ..AdamConfig::default()
        };
        let mut opt = Adam::new(cfg, p.len());
        let mut q = p.clone();
        let norm = opt.update(&mut q, &g).unwrap();
        assert!((norm - 10.0).abs() < 1e-12);
        let applied: f64 = libm::sqrt(opt.m.iter().map(|v| v * v).sum());
        assert!((applied - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut p = params();
        let mut g = p.zeros_like();
        g.as_mut_slice()[0] = f64::NAN;
        let mut opt = Adam::new(AdamConfig::default(), p.len());
        assert!(matches!(opt.update(&mut p, &g), Err(Error::Numeric(_))));
    }
}
