//! The diffusion policy: a noise-prediction MLP driving a DDPM reverse
//! chain from `a_T ~ N(0, I)` to the action `a_0`.
//!
//! Each step applies
//!
//! ```text
//! μ = (a_t − β_t/√(1−ᾱ_t) · ε_θ(a_t, s, t)) / √α_t
//! a_{t−1} = μ + √β_t · z,   z ~ N(0, I)
//! ```
//!
//! for `t = T..1`; the last step (`t = 1`) adds no noise unless
//! [`DiffusionConfig::final_step_noise`] is set. The result is clipped to
//! `[−1, 1]^d`. [`DiffusionPolicy::sample_on`] records the whole chain on a
//! [`Graph`] so a loss on `a_0` differentiates through every step.

use rand::Rng;

use crate::actor::Actor;
use crate::error::{Error, Result};
use crate::numcore::{sinusoidal_embed, Activation, ClampGrad, Graph, Mlp, MlpVars, Scalar, Tensor, Var};

pub use crate::actor::policy_loss;

pub const BETA_MIN: f64 = 0.1;
pub const BETA_MAX: f64 = 10.0;
pub const TIME_EMBED_DIM: usize = 16;

/// Per-step constants `β_t`, `α_t = 1 − β_t`, `ᾱ_t = Π_{k≤t} α_k`.
///
/// Stored zero-based: index `t − 1` holds step `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionSchedule<S> {
    beta: Vec<S>,
    alpha: Vec<S>,
    alpha_bar: Vec<S>,
}

impl<S: Scalar> DiffusionSchedule<S> {
    /// Variance-preserving discretization
    /// `β_t = 1 − exp(−β_min/T − (β_max − β_min)(2t − 1)/(2T²))`.
    pub fn new(steps: usize) -> Result<Self> {
        if steps < 1 {
            return Err(Error::config("diffusion needs at least one step"));
        }
        let big_t = steps as f64;
        let mut beta = Vec::with_capacity(steps);
        let mut alpha = Vec::with_capacity(steps);
        let mut alpha_bar = Vec::with_capacity(steps);
        let mut prod = 1.0f64;
        for t in 1..=steps {
            let a = (-BETA_MIN / big_t - (BETA_MAX - BETA_MIN) * (2.0 * t as f64 - 1.0) / (2.0 * big_t * big_t)).exp();
            prod *= a;
            beta.push(S::lit(1.0 - a));
            alpha.push(S::lit(a));
            alpha_bar.push(S::lit(prod));
        }
        Ok(Self { beta, alpha, alpha_bar })
    }

    pub fn steps(&self) -> usize {
        self.beta.len()
    }

    fn check(&self, t: usize) -> Result<usize> {
        if t == 0 || t > self.steps() {
            return Err(Error::contract(format!("step {t} outside 1..={}", self.steps())));
        }
        Ok(t - 1)
    }

    pub fn beta(&self, t: usize) -> Result<S> {
        Ok(self.beta[self.check(t)?])
    }

    pub fn alpha(&self, t: usize) -> Result<S> {
        Ok(self.alpha[self.check(t)?])
    }

    pub fn alpha_bar(&self, t: usize) -> Result<S> {
        Ok(self.alpha_bar[self.check(t)?])
    }

    /// `(1/√α_t, β_t/√(1−ᾱ_t), √β_t)` for step `t`.
    fn step_coefficients(&self, t: usize) -> Result<(S, S, S)> {
        let i = self.check(t)?;
        let inv_sqrt_alpha = S::one() / self.alpha[i].sqrt();
        let eps_coef = self.beta[i] / (S::one() - self.alpha_bar[i]).sqrt();
        Ok((inv_sqrt_alpha, eps_coef, self.beta[i].sqrt()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiffusionConfig {
    pub steps: usize,
    /// Add `√β_1·z` at the last step as well.
    pub final_step_noise: bool,
    /// Gradient rule for the final clip to `[−1, 1]`.
    pub clip_grad: ClampGrad,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        Self {
            steps: 20,
            final_step_noise: false,
            clip_grad: ClampGrad::Exact,
        }
    }
}

/// Gaussian draws consumed by one batch of reverse chains.
///
/// Drawn up front in a fixed order (`a_T`, then step `T`, `T−1`, …) so the
/// tape-free and recorded samplers see identical noise for a given seed.
#[derive(Clone, Debug)]
pub struct ChainNoise<S> {
    pub initial: Tensor<S>,
    /// `per_step[t − 1]` is added at step `t`; `None` means no noise.
    pub per_step: Vec<Option<Tensor<S>>>,
}

impl<S: Scalar> ChainNoise<S> {
    pub fn draw<R: Rng + ?Sized>(batch: usize, dim: usize, steps: usize, final_step_noise: bool, rng: &mut R) -> Self {
        let mut gauss = || Tensor::from_fn(batch, dim, |_, _| S::standard_normal(rng));
        let initial = gauss();
        let mut per_step = vec![None; steps];
        for t in (1..=steps).rev() {
            if t > 1 || final_step_noise {
                per_step[t - 1] = Some(gauss());
            }
        }
        Self { initial, per_step }
    }

    pub fn zeros(batch: usize, dim: usize, steps: usize) -> Self {
        Self {
            initial: Tensor::zeros(&[batch, dim]),
            per_step: vec![None; steps],
        }
    }
}

/// Result of one batch of reverse chains.
#[derive(Clone, Debug)]
pub struct PolicyOutput<S> {
    /// `a_0` clipped to `[−1, 1]^d`, shape `[batch, d]`.
    pub action: Tensor<S>,
    pub pre_clip_action: Tensor<S>,
}

/// `ε_θ(a_t, s, t)`: an MLP over `concat(s, a_t, embed(t))`.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseNet<S> {
    pub net: Mlp<S>,
    state_dim: usize,
    action_dim: usize,
}

impl<S: Scalar> NoiseNet<S> {
    pub fn new<R: Rng + ?Sized>(state_dim: usize, action_dim: usize, hidden: &[usize], rng: &mut R) -> Result<Self> {
        let mut sizes = vec![state_dim + action_dim + TIME_EMBED_DIM];
        sizes.extend_from_slice(hidden);
        sizes.push(action_dim);
        Ok(Self {
            net: Mlp::new(&sizes, Activation::Mish, rng)?,
            state_dim,
            action_dim,
        })
    }

    pub fn from_mlp(net: Mlp<S>, state_dim: usize, action_dim: usize) -> Result<Self> {
        if net.input_dim() != state_dim + action_dim + TIME_EMBED_DIM || net.output_dim() != action_dim {
            return Err(Error::dim(format!(
                "noise net {:?} does not fit state dim {state_dim}, action dim {action_dim}",
                net.sizes()
            )));
        }
        Ok(Self {
            net,
            state_dim,
            action_dim,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }
}

#[derive(Clone, Debug)]
pub struct DiffusionPolicy<S> {
    pub noise_net: NoiseNet<S>,
    schedule: DiffusionSchedule<S>,
    config: DiffusionConfig,
    embeddings: Vec<Vec<S>>,
}

fn repeat_row<S: Scalar>(row: &[S], batch: usize) -> Tensor<S> {
    Tensor::from_fn(batch, row.len(), |_, j| row[j])
}

fn hcat<S: Scalar>(parts: &[&Tensor<S>]) -> Tensor<S> {
    let rows = parts[0].rows();
    let cols: usize = parts.iter().map(|p| p.cols()).sum();
    let mut data = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for p in parts {
            data.extend_from_slice(p.row(i));
        }
    }
    Tensor::new(vec![rows, cols], data).expect("consistent widths")
}

impl<S: Scalar> DiffusionPolicy<S> {
    pub fn new(noise_net: NoiseNet<S>, config: DiffusionConfig) -> Result<Self> {
        let schedule = DiffusionSchedule::new(config.steps)?;
        let embeddings = (1..=config.steps)
            .map(|t| sinusoidal_embed(t, TIME_EMBED_DIM))
            .collect::<Result<_>>()?;
        Ok(Self {
            noise_net,
            schedule,
            config,
            embeddings,
        })
    }

    pub fn schedule(&self) -> &DiffusionSchedule<S> {
        &self.schedule
    }

    pub fn config(&self) -> &DiffusionConfig {
        &self.config
    }

    pub fn state_dim(&self) -> usize {
        self.noise_net.state_dim
    }

    fn check_states(&self, states: &Tensor<S>) -> Result<()> {
        if states.cols() != self.state_dim() || states.shape().len() != 2 {
            return Err(Error::dim(format!(
                "policy expects [batch, {}] states, got {:?}",
                self.state_dim(),
                states.shape()
            )));
        }
        Ok(())
    }

    /// `ε_θ(a_t, s, t)` for a batch.
    pub fn predict_noise(&self, a_t: &Tensor<S>, states: &Tensor<S>, t: usize) -> Result<Tensor<S>> {
        let i = self.schedule.check(t)?;
        let emb = repeat_row(&self.embeddings[i], states.rows());
        self.noise_net.net.forward(&hcat(&[states, a_t, &emb]))
    }

    /// `μ_θ(a_t, s, t)` for a batch.
    pub fn posterior_mean(&self, a_t: &Tensor<S>, states: &Tensor<S>, t: usize) -> Result<Tensor<S>> {
        let eps = self.predict_noise(a_t, states, t)?;
        self.mean_from_noise(a_t, &eps, t)
    }

    fn mean_from_noise(&self, a_t: &Tensor<S>, eps: &Tensor<S>, t: usize) -> Result<Tensor<S>> {
        let (inv_sqrt_alpha, eps_coef, _) = self.schedule.step_coefficients(t)?;
        let data = a_t
            .data()
            .iter()
            .zip(eps.data())
            .map(|(&a, &e)| inv_sqrt_alpha * (a - eps_coef * e))
            .collect();
        Tensor::new(a_t.shape().to_vec(), data)
    }

    /// The reverse chain with an arbitrary noise predictor `(a_t, t) ↦ ε`.
    fn run_chain(
        &self,
        noise: &ChainNoise<S>,
        mut predict: impl FnMut(&Tensor<S>, usize) -> Result<Tensor<S>>,
    ) -> Result<PolicyOutput<S>> {
        let mut a = noise.initial.clone();
        for t in (1..=self.schedule.steps()).rev() {
            let eps = predict(&a, t)?;
            let mut next = self.mean_from_noise(&a, &eps, t)?;
            if let Some(z) = &noise.per_step[t - 1] {
                let sqrt_beta = self.schedule.step_coefficients(t)?.2;
                for (x, &zi) in next.data_mut().iter_mut().zip(z.data()) {
                    *x = *x + sqrt_beta * zi;
                }
            }
            if !next.is_finite() {
                return Err(Error::numeric(format!("non-finite action at diffusion step {t}")));
            }
            a = next;
        }
        let action = a.map(|x| x.max(-S::one()).min(S::one()));
        Ok(PolicyOutput {
            action,
            pre_clip_action: a,
        })
    }

    /// Run the chain with pre-drawn noise, without recording.
    pub fn sample_with(&self, states: &Tensor<S>, noise: &ChainNoise<S>) -> Result<PolicyOutput<S>> {
        self.check_states(states)?;
        self.run_chain(noise, |a, t| self.predict_noise(a, states, t))
    }

    pub fn draw_noise<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> ChainNoise<S> {
        ChainNoise::draw(
            batch,
            self.noise_net.action_dim,
            self.schedule.steps(),
            self.config.final_step_noise,
            rng,
        )
    }

    /// One chain per row of `states`.
    pub fn sample<R: Rng + ?Sized>(&self, states: &Tensor<S>, rng: &mut R) -> Result<PolicyOutput<S>> {
        let noise = self.draw_noise(states.rows(), rng);
        self.sample_with(states, &noise)
    }

    /// Recorded chain with pre-drawn noise; returns the clipped `a_0`.
    pub fn sample_on_with(&self, g: &mut Graph<S>, vars: &MlpVars, states: Var, noise: &ChainNoise<S>) -> Result<Var> {
        self.check_states(g.value(states))?;
        let batch = g.value(states).rows();
        let mut a = g.constant(noise.initial.clone());
        for t in (1..=self.schedule.steps()).rev() {
            let (inv_sqrt_alpha, eps_coef, sqrt_beta) = self.schedule.step_coefficients(t)?;
            let emb = g.constant(repeat_row(&self.embeddings[t - 1], batch));
            let input = g.concat_cols(&[states, a, emb])?;
            let eps = self.noise_net.net.forward_on(g, vars, input)?;
            let scaled = g.scale(eps, eps_coef);
            let diff = g.sub(a, scaled)?;
            let mut next = g.scale(diff, inv_sqrt_alpha);
            if let Some(z) = &noise.per_step[t - 1] {
                let z = g.constant(z.map(|zi| zi * sqrt_beta));
                next = g.add(next, z)?;
            }
            if !g.value(next).is_finite() {
                return Err(Error::numeric(format!("non-finite action at diffusion step {t}")));
            }
            a = next;
        }
        Ok(g.clamp(a, -S::one(), S::one(), self.config.clip_grad))
    }
}

impl<S: Scalar> Actor<S> for DiffusionPolicy<S> {
    fn state_dim(&self) -> usize {
        self.noise_net.state_dim
    }

    fn action_dim(&self) -> usize {
        self.noise_net.action_dim
    }

    fn net(&self) -> &Mlp<S> {
        &self.noise_net.net
    }

    fn net_mut(&mut self) -> &mut Mlp<S> {
        &mut self.noise_net.net
    }

    fn act<R: Rng + ?Sized>(&self, states: &Tensor<S>, rng: &mut R) -> Result<Tensor<S>> {
        Ok(self.sample(states, rng)?.action)
    }

    fn act_on<R: Rng + ?Sized>(&self, g: &mut Graph<S>, vars: &MlpVars, states: Var, rng: &mut R) -> Result<Var> {
        let noise = self.draw_noise(g.value(states).rows(), rng);
        self.sample_on_with(g, vars, states, &noise)
    }
}
