use rand::Rng;

use crate::error::{Error, Result};
use crate::numcore::{Scalar, Tensor};

/// How the noise factor `α` evolves over a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseMode<S> {
    /// `α ← max(0, α − β_α(Ĥ − H̄))` at each entropy estimate.
    Adaptive,
    /// `α` held at its initial value.
    Fixed,
    /// `α` moves linearly from `start` to `end` over training progress.
    LinearDecay { start: S, end: S },
    /// No exploration noise at all.
    Off,
}

impl<S: Scalar> NoiseMode<S> {
    pub fn name(&self) -> &'static str {
        match self {
            NoiseMode::Adaptive => "adaptive",
            NoiseMode::Fixed => "fixed",
            NoiseMode::LinearDecay { .. } => "linear",
            NoiseMode::Off => "off",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlphaState<S> {
    alpha: S,
    pub lr: S,
    pub target_entropy: S,
    /// Noise scale `λ`; the injected standard deviation is `λα`.
    pub lambda: S,
    pub mode: NoiseMode<S>,
}

impl<S: Scalar> AlphaState<S> {
    pub fn new(alpha: S, lr: S, target_entropy: S, lambda: S, mode: NoiseMode<S>) -> Result<Self> {
        if !(alpha >= S::zero()) || !(lambda >= S::zero()) || !(lr >= S::zero()) {
            return Err(Error::config("alpha, its learning rate and lambda must be non-negative"));
        }
        let mut state = Self {
            alpha,
            lr,
            target_entropy,
            lambda,
            mode,
        };
        state.set_progress(S::zero());
        Ok(state)
    }

    pub fn alpha(&self) -> S {
        match self.mode {
            NoiseMode::Off => S::zero(),
            _ => self.alpha,
        }
    }

    /// Standard deviation of the injected exploration noise.
    pub fn noise_std(&self) -> S {
        self.lambda * self.alpha()
    }

    /// Track training progress in `[0, 1]`; only `LinearDecay` reacts.
    pub fn set_progress(&mut self, progress: S) {
        if let NoiseMode::LinearDecay { start, end } = self.mode {
            let p = progress.max(S::zero()).min(S::one());
            self.alpha = start + (end - start) * p;
        }
    }

    /// Apply one regulator step given the estimated entropy `Ĥ`.
    ///
    /// A non-finite `Ĥ` leaves `α` untouched and reports a numeric fault.
    pub fn update_alpha(&mut self, entropy: S, progress: S) -> Result<()> {
        if !entropy.is_finite() {
            return Err(Error::numeric(format!("entropy estimate is {entropy}; alpha update skipped")));
        }
        match self.mode {
            NoiseMode::Adaptive => {
                self.alpha = (self.alpha - self.lr * (entropy - self.target_entropy)).max(S::zero());
            }
            NoiseMode::LinearDecay { .. } => self.set_progress(progress),
            NoiseMode::Fixed | NoiseMode::Off => {}
        }
        Ok(())
    }

    /// `clip(a + λα·ε, −1, 1)` in training mode; identity in evaluation mode.
    pub fn apply_exploration_noise<R: Rng + ?Sized>(&self, actions: &mut Tensor<S>, rng: &mut R, eval_mode: bool) {
        let std = self.noise_std();
        if eval_mode || std == S::zero() {
            return;
        }
        for a in actions.data_mut() {
            *a = (*a + std * S::standard_normal(rng)).max(-S::one()).min(S::one());
        }
    }
}
