//! Run configuration and its plain-text `key=value` form.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::entropy::NoiseMode;
use crate::envs::MultiGoalSpec;
use crate::error::{Error, Result};
use crate::numcore::ClampGrad;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolicyKind {
    Diffusion,
    Gaussian,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseModeName {
    Adaptive,
    Fixed,
    Linear,
    Off,
}

impl FromStr for NoiseModeName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adaptive" => Ok(Self::Adaptive),
            "fixed" => Ok(Self::Fixed),
            "linear" => Ok(Self::Linear),
            "off" | "none" => Ok(Self::Off),
            _ => Err(Error::config(format!("unknown noise mode {s:?}"))),
        }
    }
}

impl NoiseModeName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Adaptive => "adaptive",
            Self::Fixed => "fixed",
            Self::Linear => "linear",
            Self::Off => "off",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub env: String,
    pub seed: u64,
    pub total_steps: u64,
    pub warmup: usize,
    pub batch_size: usize,
    pub gamma: f64,
    /// Target blend-in rate: `φ' ← (1 − rho)·φ' + rho·φ`.
    pub rho: f64,
    pub policy_delay: u64,
    pub alpha_delay: u64,
    pub lambda: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub alpha_lr: f64,
    pub initial_alpha: f64,
    /// Defaults to `−0.9·dim(A)` when unset.
    pub target_entropy: Option<f64>,
    pub diffusion_steps: usize,
    pub final_step_noise: bool,
    pub clip_grad: ClampGrad,
    pub gmm_components: usize,
    pub entropy_samples: usize,
    pub entropy_states: usize,
    pub reward_scale: f64,
    pub buffer_capacity: usize,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub policy: PolicyKind,
    pub noise_mode: NoiseModeName,
    pub fixed_alpha: f64,
    pub linear_start: f64,
    pub linear_end: f64,
    pub max_grad_norm: Option<f64>,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub metrics_interval: u64,
    pub checkpoint_interval: u64,
    pub keep_checkpoints: usize,
    pub multigoal_horizon: usize,
    pub multigoal_action_cost: f64,
    pub multigoal_goal_radius: f64,
    pub multigoal_reset_std: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let mg = MultiGoalSpec::default();
        Self {
            env: "multigoal".into(),
            seed: 0,
            total_steps: 1_500_000,
            warmup: 30_000,
            batch_size: 256,
            gamma: 0.99,
            rho: 0.005,
            policy_delay: 2,
            alpha_delay: 10_000,
            lambda: 0.1,
            actor_lr: 1e-4,
            critic_lr: 1e-4,
            alpha_lr: 3e-2,
            initial_alpha: 0.27,
            target_entropy: None,
            diffusion_steps: 20,
            final_step_noise: false,
            clip_grad: ClampGrad::Exact,
            gmm_components: 3,
            entropy_samples: 200,
            entropy_states: 32,
            reward_scale: 0.2,
            buffer_capacity: 1_000_000,
            actor_hidden: vec![256, 256, 256],
            critic_hidden: vec![256, 256, 256],
            policy: PolicyKind::Diffusion,
            noise_mode: NoiseModeName::Adaptive,
            fixed_alpha: 0.1,
            linear_start: 0.27,
            linear_end: 0.1,
            max_grad_norm: None,
            eval_interval: 5_000,
            eval_episodes: 10,
            metrics_interval: 100,
            checkpoint_interval: 10_000,
            keep_checkpoints: 3,
            multigoal_horizon: mg.horizon,
            multigoal_action_cost: mg.action_cost,
            multigoal_goal_radius: mg.goal_radius,
            multigoal_reset_std: mg.reset_std,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(format!("{key}: cannot parse {value:?}")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    value.split(',').map(|v| parse(key, v)).collect()
}

fn parse_opt(key: &str, value: &str) -> Result<Option<f64>> {
    match value.trim() {
        "" | "none" | "auto" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

fn list(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| x.to_string())
}

impl TrainConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "env" => self.env = v.to_string(),
            "seed" => self.seed = parse(key, v)?,
            "total_steps" => self.total_steps = parse(key, v)?,
            "warmup" => self.warmup = parse(key, v)?,
            "batch_size" => self.batch_size = parse(key, v)?,
            "gamma" => self.gamma = parse(key, v)?,
            "rho" => self.rho = parse(key, v)?,
            "policy_delay" => self.policy_delay = parse(key, v)?,
            "alpha_delay" => self.alpha_delay = parse(key, v)?,
            "lambda" => self.lambda = parse(key, v)?,
            "actor_lr" => self.actor_lr = parse(key, v)?,
            "critic_lr" => self.critic_lr = parse(key, v)?,
            "alpha_lr" => self.alpha_lr = parse(key, v)?,
            "initial_alpha" => self.initial_alpha = parse(key, v)?,
            "target_entropy" => self.target_entropy = parse_opt(key, v)?,
            "diffusion_steps" => self.diffusion_steps = parse(key, v)?,
            "final_step_noise" => self.final_step_noise = parse(key, v)?,
            "clip_grad" => {
                self.clip_grad = match v {
                    "exact" => ClampGrad::Exact,
                    "straight_through" => ClampGrad::StraightThrough,
                    _ => return Err(Error::config(format!("clip_grad: unknown rule {v:?}"))),
                }
            }
            "gmm_components" => self.gmm_components = parse(key, v)?,
            "entropy_samples" => self.entropy_samples = parse(key, v)?,
            "entropy_states" => self.entropy_states = parse(key, v)?,
            "reward_scale" => self.reward_scale = parse(key, v)?,
            "buffer_capacity" => self.buffer_capacity = parse(key, v)?,
            "actor_hidden" => self.actor_hidden = parse_list(key, v)?,
            "critic_hidden" => self.critic_hidden = parse_list(key, v)?,
            "policy" => {
                self.policy = match v {
                    "diffusion" => PolicyKind::Diffusion,
                    "gaussian" => PolicyKind::Gaussian,
                    _ => return Err(Error::config(format!("policy: unknown kind {v:?}"))),
                }
            }
            "noise_mode" => self.noise_mode = v.parse()?,
            "fixed_alpha" => self.fixed_alpha = parse(key, v)?,
            "linear_start" => self.linear_start = parse(key, v)?,
            "linear_end" => self.linear_end = parse(key, v)?,
            "max_grad_norm" => self.max_grad_norm = parse_opt(key, v)?,
            "eval_interval" => self.eval_interval = parse(key, v)?,
            "eval_episodes" => self.eval_episodes = parse(key, v)?,
            "metrics_interval" => self.metrics_interval = parse(key, v)?,
            "checkpoint_interval" => self.checkpoint_interval = parse(key, v)?,
            "keep_checkpoints" => self.keep_checkpoints = parse(key, v)?,
            "multigoal_horizon" => self.multigoal_horizon = parse(key, v)?,
            "multigoal_action_cost" => self.multigoal_action_cost = parse(key, v)?,
            "multigoal_goal_radius" => self.multigoal_goal_radius = parse(key, v)?,
            "multigoal_reset_std" => self.multigoal_reset_std = parse(key, v)?,
            other => return Err(Error::config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Every field as `(key, value)` in a stable order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("env", self.env.clone()),
            ("seed", self.seed.to_string()),
            ("total_steps", self.total_steps.to_string()),
            ("warmup", self.warmup.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("gamma", self.gamma.to_string()),
            ("rho", self.rho.to_string()),
            ("policy_delay", self.policy_delay.to_string()),
            ("alpha_delay", self.alpha_delay.to_string()),
            ("lambda", self.lambda.to_string()),
            ("actor_lr", self.actor_lr.to_string()),
            ("critic_lr", self.critic_lr.to_string()),
            ("alpha_lr", self.alpha_lr.to_string()),
            ("initial_alpha", self.initial_alpha.to_string()),
            ("target_entropy", opt(self.target_entropy)),
            ("diffusion_steps", self.diffusion_steps.to_string()),
            ("final_step_noise", self.final_step_noise.to_string()),
            (
                "clip_grad",
                match self.clip_grad {
                    ClampGrad::Exact => "exact",
                    ClampGrad::StraightThrough => "straight_through",
                }
                .to_string(),
            ),
            ("gmm_components", self.gmm_components.to_string()),
            ("entropy_samples", self.entropy_samples.to_string()),
            ("entropy_states", self.entropy_states.to_string()),
            ("reward_scale", self.reward_scale.to_string()),
            ("buffer_capacity", self.buffer_capacity.to_string()),
            ("actor_hidden", list(&self.actor_hidden)),
            ("critic_hidden", list(&self.critic_hidden)),
            (
                "policy",
                match self.policy {
                    PolicyKind::Diffusion => "diffusion",
                    PolicyKind::Gaussian => "gaussian",
                }
                .to_string(),
            ),
            ("noise_mode", self.noise_mode.as_str().to_string()),
            ("fixed_alpha", self.fixed_alpha.to_string()),
            ("linear_start", self.linear_start.to_string()),
            ("linear_end", self.linear_end.to_string()),
            ("max_grad_norm", opt(self.max_grad_norm)),
            ("eval_interval", self.eval_interval.to_string()),
            ("eval_episodes", self.eval_episodes.to_string()),
            ("metrics_interval", self.metrics_interval.to_string()),
            ("checkpoint_interval", self.checkpoint_interval.to_string()),
            ("keep_checkpoints", self.keep_checkpoints.to_string()),
            ("multigoal_horizon", self.multigoal_horizon.to_string()),
            ("multigoal_action_cost", self.multigoal_action_cost.to_string()),
            ("multigoal_goal_radius", self.multigoal_goal_radius.to_string()),
            ("multigoal_reset_std", self.multigoal_reset_std.to_string()),
        ]
    }

    /// Parse `key=value` lines; blank lines and `#` comments are ignored.
    pub fn parse_text(text: &str, mut base: TrainConfig) -> Result<TrainConfig> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected key=value", n + 1)))?;
            base.set(k, v)?;
        }
        base.validate()?;
        Ok(base)
    }

    pub fn from_file(path: &Path) -> Result<TrainConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_text(&text, TrainConfig::default())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            writeln!(out, "{k}={v}").expect("string write");
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("batch_size", self.batch_size as f64),
            ("policy_delay", self.policy_delay as f64),
            ("alpha_delay", self.alpha_delay as f64),
            ("diffusion_steps", self.diffusion_steps as f64),
            ("gmm_components", self.gmm_components as f64),
            ("entropy_samples", self.entropy_samples as f64),
            ("entropy_states", self.entropy_states as f64),
            ("buffer_capacity", self.buffer_capacity as f64),
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
            ("reward_scale", self.reward_scale),
            ("eval_episodes", self.eval_episodes as f64),
            ("metrics_interval", self.metrics_interval as f64),
        ];
        for (k, v) in positive {
            if !(v > 0.0) {
                return Err(Error::config(format!("{k} must be positive")));
            }
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::config("gamma must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::config("rho must lie in [0, 1]"));
        }
        if self.entropy_samples < self.gmm_components {
            return Err(Error::config("entropy_samples must be at least gmm_components"));
        }
        if self.actor_hidden.contains(&0) || self.critic_hidden.contains(&0) {
            return Err(Error::config("hidden widths must be positive"));
        }
        Ok(())
    }

    pub fn multigoal_spec(&self) -> MultiGoalSpec {
        MultiGoalSpec {
            horizon: self.multigoal_horizon,
            action_cost: self.multigoal_action_cost,
            goal_radius: self.multigoal_goal_radius,
            reset_std: self.multigoal_reset_std,
            ..MultiGoalSpec::default()
        }
    }

    pub fn target_entropy_for(&self, action_dim: usize) -> f64 {
        self.target_entropy.unwrap_or(-0.9 * action_dim as f64)
    }

    pub fn noise_mode(&self) -> NoiseMode<f64> {
        match self.noise_mode {
            NoiseModeName::Adaptive => NoiseMode::Adaptive,
            NoiseModeName::Fixed => NoiseMode::Fixed,
            NoiseModeName::Linear => NoiseMode::LinearDecay {
                start: self.linear_start,
                end: self.linear_end,
            },
            NoiseModeName::Off => NoiseMode::Off,
        }
    }

    /// Starting `α` for the configured mode.
    pub fn starting_alpha(&self) -> f64 {
        match self.noise_mode {
            NoiseModeName::Fixed => self.fixed_alpha,
            NoiseModeName::Linear => self.linear_start,
            _ => self.initial_alpha,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_reference_table() {
        let c = TrainConfig::default();
        assert_eq!(c.warmup, 30_000);
        assert_eq!(c.batch_size, 256);
        assert_eq!(c.buffer_capacity, 1_000_000);
        assert_eq!(c.policy_delay, 2);
        assert_eq!(c.alpha_delay, 10_000);
        assert_eq!((c.gamma, c.rho, c.lambda), (0.99, 0.005, 0.1));
        assert_eq!((c.actor_lr, c.critic_lr, c.alpha_lr), (1e-4, 1e-4, 3e-2));
        assert_eq!(c.initial_alpha, 0.27);
        assert_eq!((c.diffusion_steps, c.gmm_components, c.entropy_samples), (20, 3, 200));
        assert_eq!(c.reward_scale, 0.2);
        assert!((c.target_entropy_for(2) + 1.8).abs() < 1e-12);
    }

    #[test]
    fn text_round_trip() {
        let mut c = TrainConfig::default();
        c.seed = 7;
        c.actor_hidden = vec![32, 32];
        c.noise_mode = NoiseModeName::Linear;
        c.max_grad_norm = Some(5.0);
        let back = TrainConfig::parse_text(&c.to_text(), TrainConfig::default()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn comments_and_errors() {
        let c = TrainConfig::parse_text("# run\nseed = 3 # inline\n\nenv=bandit\n", TrainConfig::default()).unwrap();
        assert_eq!((c.seed, c.env.as_str()), (3, "bandit"));
        assert!(TrainConfig::parse_text("bogus=1", TrainConfig::default()).is_err());
        assert!(TrainConfig::parse_text("seed", TrainConfig::default()).is_err());
        assert!(TrainConfig::parse_text("gamma=1.5", TrainConfig::default()).is_err());
        assert!(TrainConfig::parse_text("policy_delay=0", TrainConfig::default()).is_err());
    }
}
