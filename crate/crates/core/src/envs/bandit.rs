//! One-step, one-dimensional bandit with two equally good actions.
//!
//! `r(a) = exp(−(a − 0.6)²/0.02) + exp(−(a + 0.6)²/0.02)`. The midpoint
//! is nearly worthless, so a policy that averages the modes is punished.

use rand::RngCore;

use crate::error::{Error, Result};

use super::{Env, EnvStep, StepInfo};

pub const MODE: f64 = 0.6;
pub const WIDTH: f64 = 0.02;

pub fn bandit_reward(a: f64) -> f64 {
    (-(a - MODE).powi(2) / WIDTH).exp() + (-(a + MODE).powi(2) / WIDTH).exp()
}

#[derive(Clone, Debug, Default)]
pub struct BimodalBandit {
    active: bool,
}

impl BimodalBandit {
    pub fn new() -> Self {
        Self { active: false }
    }
}

impl Env for BimodalBandit {
    fn name(&self) -> &str {
        "bandit"
    }

    fn state_dim(&self) -> usize {
        1
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn reset(&mut self, _rng: &mut dyn RngCore) -> Vec<f64> {
        self.active = true;
        vec![0.0]
    }

    fn step(&mut self, action: &[f64]) -> Result<EnvStep> {
        if !self.active {
            return Err(Error::contract("step on a finished episode; reset first"));
        }
        if action.len() != 1 || !action[0].is_finite() {
            return Err(Error::contract(format!("bad action {action:?}")));
        }
        self.active = false;
        let a = action[0].clamp(-1.0, 1.0);
        Ok(EnvStep {
            state: vec![0.0],
            reward: bandit_reward(a),
            terminal: true,
            truncated: false,
            info: StepInfo::default(),
        })
    }
}
