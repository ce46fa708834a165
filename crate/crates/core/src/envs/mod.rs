//! Desk-scale environments.

pub mod bandit;
pub mod multigoal;

use rand::RngCore;

pub use bandit::BimodalBandit;
pub use multigoal::{MultiGoal, MultiGoalSpec};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepInfo {
    pub distance_to_goal: Option<f64>,
    pub reached_goal: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvStep {
    pub state: Vec<f64>,
    /// Unscaled reward.
    pub reward: f64,
    /// The episode ended in a terminal state.
    pub terminal: bool,
    /// The episode hit its time limit without terminating.
    pub truncated: bool,
    pub info: StepInfo,
}

impl EnvStep {
    pub fn done(&self) -> bool {
        self.terminal || self.truncated
    }
}

pub trait Env {
    fn name(&self) -> &str;
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64>;
    /// Fails if the episode is already over.
    fn step(&mut self, action: &[f64]) -> Result<EnvStep>;
}

/// An environment chosen by name at run time.
#[derive(Clone, Debug)]
pub enum AnyEnv {
    MultiGoal(MultiGoal),
    Bandit(BimodalBandit),
}

impl AnyEnv {
    /// `multigoal` or `bandit`.
    pub fn by_name(name: &str, spec: MultiGoalSpec) -> Result<Self> {
        match name {
            "multigoal" | "multi-goal" => Ok(AnyEnv::MultiGoal(MultiGoal::new(spec))),
            "bandit" => Ok(AnyEnv::Bandit(BimodalBandit::new())),
            other => Err(Error::config(format!("unknown environment {other:?}"))),
        }
    }
}

impl Env for AnyEnv {
    fn name(&self) -> &str {
        match self {
            AnyEnv::MultiGoal(e) => e.name(),
            AnyEnv::Bandit(e) => e.name(),
        }
    }

    fn state_dim(&self) -> usize {
        match self {
            AnyEnv::MultiGoal(e) => e.state_dim(),
            AnyEnv::Bandit(e) => e.state_dim(),
        }
    }

    fn action_dim(&self) -> usize {
        match self {
            AnyEnv::MultiGoal(e) => e.action_dim(),
            AnyEnv::Bandit(e) => e.action_dim(),
        }
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        match self {
            AnyEnv::MultiGoal(e) => e.reset(rng),
            AnyEnv::Bandit(e) => e.reset(rng),
        }
    }

    fn step(&mut self, action: &[f64]) -> Result<EnvStep> {
        match self {
            AnyEnv::MultiGoal(e) => e.step(action),
            AnyEnv::Bandit(e) => e.step(action),
        }
    }
}
