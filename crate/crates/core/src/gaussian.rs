//! Diagonal-Gaussian control policy: `a = clip(μ(s) + σ(s)·z)`.
//!
//! Used as the unimodal reference against which the diffusion policy's
//! multimodality is measured.

use rand::Rng;

use crate::actor::Actor;
use crate::error::{Error, Result};
use crate::numcore::{Activation, ClampGrad, Graph, Mlp, MlpVars, Scalar, Tensor, Var};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianPolicy<S> {
    /// Outputs `[μ (d), log σ (d)]`.
    pub net: Mlp<S>,
    state_dim: usize,
    action_dim: usize,
}

impl<S: Scalar> GaussianPolicy<S> {
    pub fn new<R: Rng + ?Sized>(state_dim: usize, action_dim: usize, hidden: &[usize], rng: &mut R) -> Result<Self> {
        let mut sizes = vec![state_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(2 * action_dim);
        Ok(Self {
            net: Mlp::new(&sizes, Activation::Gelu, rng)?,
            state_dim,
            action_dim,
        })
    }

    fn check(&self, states: &Tensor<S>) -> Result<()> {
        if states.cols() != self.state_dim {
            return Err(Error::dim(format!(
                "policy expects {} state columns, got {:?}",
                self.state_dim,
                states.shape()
            )));
        }
        Ok(())
    }
}

impl<S: Scalar> Actor<S> for GaussianPolicy<S> {
    fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn action_dim(&self) -> usize {
        self.action_dim
    }

    fn net(&self) -> &Mlp<S> {
        &self.net
    }

    fn net_mut(&mut self) -> &mut Mlp<S> {
        &mut self.net
    }

    fn act<R: Rng + ?Sized>(&self, states: &Tensor<S>, rng: &mut R) -> Result<Tensor<S>> {
        self.check(states)?;
        let out = self.net.forward(states)?;
        let d = self.action_dim;
        let (lo, hi) = (S::lit(LOG_STD_MIN), S::lit(LOG_STD_MAX));
        Ok(Tensor::from_fn(states.rows(), d, |i, j| {
            let mu = out.at(i, j);
            let sigma = out.at(i, d + j).max(lo).min(hi).exp();
            (mu + sigma * S::standard_normal(rng)).max(-S::one()).min(S::one())
        }))
    }

    fn act_on<R: Rng + ?Sized>(&self, g: &mut Graph<S>, vars: &MlpVars, states: Var, rng: &mut R) -> Result<Var> {
        self.check(g.value(states))?;
        let d = self.action_dim;
        let rows = g.value(states).rows();
        let out = self.net.forward_on(g, vars, states)?;
        let mu = g.columns(out, 0, d)?;
        let log_std = g.columns(out, d, 2 * d)?;
        let log_std = g.clamp(log_std, S::lit(LOG_STD_MIN), S::lit(LOG_STD_MAX), ClampGrad::Exact);
        let sigma = g.exp(log_std);
        let z = g.constant(Tensor::from_fn(rows, d, |_, _| S::standard_normal(rng)));
        let spread = g.mul(sigma, z)?;
        let a = g.add(mu, spread)?;
        Ok(g.clamp(a, -S::one(), S::one(), ClampGrad::Exact))
    }
}
