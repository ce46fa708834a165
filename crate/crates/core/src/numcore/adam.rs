use crate::error::{Error, Result};

use super::scalar::Scalar;
use super::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig<S> {
    pub lr: S,
    pub beta1: S,
    pub beta2: S,
    pub eps: S,
    /// Global gradient-norm clip applied before the moment updates.
    pub max_grad_norm: Option<S>,
}

impl<S: Scalar> AdamConfig<S> {
    pub fn with_lr(lr: S) -> Self {
        Self {
            lr,
            beta1: S::lit(0.9),
            beta2: S::lit(0.999),
            eps: S::lit(1e-8),
            max_grad_norm: None,
        }
    }
}

/// Adam with bias correction. Moments are allocated on the first step.
#[derive(Clone, Debug)]
pub struct AdamState<S> {
    pub config: AdamConfig<S>,
    step: u64,
    m: Vec<Tensor<S>>,
    v: Vec<Tensor<S>>,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(config: AdamConfig<S>) -> Self {
        Self {
            config,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Tensor<S>] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Tensor<S>] {
        &self.v
    }

    /// Apply one update. Nothing is modified if any gradient is non-finite
    /// or the shapes disagree.
    pub fn step<'a, I>(&mut self, params: I, grads: &[Tensor<S>]) -> Result<()>
    where
        I: IntoIterator<Item = &'a mut Tensor<S>>,
    {
        let mut params: Vec<&mut Tensor<S>> = params.into_iter().collect();
        if params.len() != grads.len() {
            return Err(Error::dim(format!(
                "{} parameters but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        for (p, g) in params.iter().zip(grads) {
            if p.shape() != g.shape() {
                return Err(Error::dim(format!(
                    "parameter {:?} vs gradient {:?}",
                    p.shape(),
                    g.shape()
                )));
            }
        }
        if let Some(bad) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::numeric(format!("non-finite gradient for parameter {bad}")));
        }
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| Tensor::zeros(g.shape())).collect();
            self.v = self.m.clone();
        } else if self.m.len() != grads.len() || self.m.iter().zip(grads).any(|(m, g)| m.shape() != g.shape()) {
            return Err(Error::dim("gradient layout changed between steps"));
        }

        let scale = match self.config.max_grad_norm {
            Some(max) => {
                let norm = grads.iter().map(Tensor::norm_sq).sum::<S>().sqrt();
                if norm > max {
                    max / norm
                } else {
                    S::one()
                }
            }
            None => S::one(),
        };

        self.step += 1;
        let AdamConfig {
            lr, beta1, beta2, eps, ..
        } = self.config;
        let t = self.step as i32;
        let c1 = S::one() - beta1.powi(t);
        let c2 = S::one() - beta2.powi(t);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for (((pi, &gi), mi), vi) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                let gi = gi * scale;
                *mi = beta1 * *mi + (S::one() - beta1) * gi;
                *vi = beta2 * *vi + (S::one() - beta2) * gi * gi;
                let m_hat = *mi / c1;
                let v_hat = *vi / c2;
                *pi = *pi - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vecs(x: &[f64]) -> Tensor<f64> {
        Tensor::new(vec![x.len()], x.to_vec()).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vecs(&[0.3, -1.0]);
        let mut adam = AdamState::new(AdamConfig::with_lr(1e-3));
        adam.step([&mut p], &[vecs(&[0.0, 0.0])]).unwrap();
        assert_eq!(p.data(), &[0.3, -1.0]);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = vecs(&[0.0]);
        let mut adam = AdamState::new(AdamConfig::with_lr(1e-4));
        adam.step([&mut p], &[vecs(&[1.0])]).unwrap();
        // m̂ = 1, v̂ = 1 → Δ = −1e-4 · 1/(1 + 1e-8)
        assert!((p.data()[0] + 1e-4 / (1.0 + 1e-8)).abs() < 1e-18);
    }

    #[test]
    fn two_steps_match_scalar_recurrence() {
        let (b1, b2, lr, eps) = (0.9, 0.999, 1e-2, 1e-8);
        let g = 0.7;
        let mut p = vecs(&[1.0]);
        let mut adam = AdamState::new(AdamConfig::with_lr(lr));
        adam.step([&mut p], &[vecs(&[g])]).unwrap();
        adam.step([&mut p], &[vecs(&[g])]).unwrap();

        let (mut m, mut v, mut x) = (0.0f64, 0.0f64, 1.0f64);
        for t in 1..=2 {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t));
            let vh = v / (1.0 - b2.powi(t));
            x -= lr * mh / (vh.sqrt() + eps);
        }
        assert!((adam.first_moments()[0].data()[0] - m).abs() < 1e-15);
        assert!((adam.second_moments()[0].data()[0] - v).abs() < 1e-15);
        assert!((p.data()[0] - x).abs() < 1e-15);
        assert_eq!(adam.steps(), 2);
    }

    #[test]
    fn nan_gradient_is_rejected_without_side_effects() {
        let mut p = vecs(&[0.5, 0.5]);
        let mut adam = AdamState::new(AdamConfig::with_lr(1e-3));
        let err = adam.step([&mut p], &[vecs(&[f64::NAN, 1.0])]).unwrap_err();
        assert!(matches!(err, Error::NumericFault(_)));
        assert_eq!(p.data(), &[0.5, 0.5]);
        assert_eq!(adam.steps(), 0);
    }

    #[test]
    fn norm_clipping_bounds_the_effective_gradient() {
        let mut p = vecs(&[0.0, 0.0]);
        let mut cfg = AdamConfig::with_lr(1.0);
        cfg.max_grad_norm = Some(1.0);
        let mut adam = AdamState::new(cfg);
        adam.step([&mut p], &[vecs(&[30.0, 40.0])]).unwrap();
        // clipped to (0.6, 0.8); first-step Adam still takes unit-sized moves
        let m = adam.first_moments()[0].data();
        assert!((m[0] - 0.06).abs() < 1e-12 && (m[1] - 0.08).abs() < 1e-12);
    }

    #[test]
    fn second_moment_stays_nonnegative() {
        let mut p = vecs(&[0.0; 3]);
        let mut adam = AdamState::new(AdamConfig::with_lr(1e-3));
        for k in 0..20 {
            let s = if k % 2 == 0 { 1.0 } else { -3.0 };
            adam.step([&mut p], &[vecs(&[s, -s, 0.1 * s])]).unwrap();
        }
        assert!(adam.second_moments()[0].data().iter().all(|&v| v >= 0.0));
    }
}
