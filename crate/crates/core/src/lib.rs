//! Diffusion actor-critic with an entropy regulator.
//!
//! The policy is the reverse chain of a denoising diffusion model, trained
//! by pushing critic gradients through every denoising step. Because the
//! chain has no closed-form density, its entropy is estimated by fitting a
//! Gaussian mixture to sampled actions, and a scalar `α` scales the
//! Gaussian exploration noise added to executed actions.
//!
//! The numerical core ([`numcore`], [`entropy`], [`diffusion`], [`critic`])
//! is generic over [`Scalar`] (`f32` or `f64`). The aliases below pin the
//! `f64` instantiation that the trainer, the environments and the
//! checkpoint format use.

pub mod actor;
pub mod critic;
pub mod diffusion;
pub mod entropy;
pub mod envs;
pub mod error;
pub mod gaussian;
pub mod harness;
pub mod numcore;
pub mod trainer;

pub use error::{Error, Result};
pub use numcore::Scalar;

pub type Tensor = numcore::Tensor<f64>;
pub type Graph = numcore::Graph<f64>;
pub type Mlp = numcore::Mlp<f64>;
pub type AdamState = numcore::AdamState<f64>;
pub type DiffusionSchedule = diffusion::DiffusionSchedule<f64>;
pub type DiffusionPolicy = diffusion::DiffusionPolicy<f64>;
pub type NoiseNet = diffusion::NoiseNet<f64>;
pub type CriticPair = critic::CriticPair<f64>;
pub type GmmModel = entropy::GmmModel<f64>;
pub type AlphaState = entropy::AlphaState<f64>;
pub type NoiseMode = entropy::NoiseMode<f64>;
pub type GaussianPolicy = gaussian::GaussianPolicy<f64>;
