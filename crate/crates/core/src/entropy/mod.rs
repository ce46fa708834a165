//! Entropy of a sample-only policy, estimated through a fitted Gaussian
//! mixture, and the regulator that turns it into exploration noise.

pub mod gmm;
pub mod regulator;

use rand::Rng;

pub use gmm::{em_fit, em_from, gmm_entropy, EmConfig, EmFit, GmmModel, Responsibilities};
pub use regulator::{AlphaState, NoiseMode};

use crate::actor::Actor;
use crate::error::{Error, Result};
use crate::numcore::{Scalar, Tensor};

#[derive(Clone, Debug)]
pub struct EntropyEstimate<S> {
    /// Mean over states, in nats.
    pub mean: S,
    pub per_state: Vec<S>,
}

/// For each state: draw `n` actions with `sample`, fit a `K`-component
/// mixture and take its entropy; report the mean over states.
pub fn estimate_entropy_with<S, R, F>(states: &Tensor<S>, n: usize, em: &EmConfig, rng: &mut R, mut sample: F) -> Result<EntropyEstimate<S>>
where
    S: Scalar,
    R: Rng + ?Sized,
    F: FnMut(&[S], usize, &mut R) -> Result<Tensor<S>>,
{
    if states.rows() == 0 || states.is_empty() {
        return Err(Error::contract("entropy estimate needs at least one state"));
    }
    if n < em.components {
        return Err(Error::contract(format!(
            "{n} samples per state cannot fit {} components",
            em.components
        )));
    }
    let mut per_state = Vec::with_capacity(states.rows());
    for i in 0..states.rows() {
        let actions = sample(states.row(i), n, rng)?;
        let fit = em_fit(&actions, em, rng)?;
        per_state.push(gmm_entropy(&fit.model)?);
    }
    let mean = per_state.iter().copied().sum::<S>() / S::lit(per_state.len() as f64);
    Ok(EntropyEstimate { mean, per_state })
}

/// Entropy of an actor's own action distribution (no exploration noise).
pub fn estimate_policy_entropy<S, A, R>(actor: &A, states: &Tensor<S>, n: usize, em: &EmConfig, rng: &mut R) -> Result<EntropyEstimate<S>>
where
    S: Scalar,
    A: Actor<S>,
    R: Rng + ?Sized,
{
    estimate_entropy_with(states, n, em, rng, |s, n, rng| {
        let batch = Tensor::from_fn(n, s.len(), |_, j| s[j]);
        actor.act(&batch, rng)
    })
}
