//! The training loop: replay, interleaved critic / policy / `α` updates,
//! evaluation, checkpoints and metrics.

pub mod buffer;
pub mod config;
pub mod metrics;

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use buffer::{ReplayBuffer, Transition};
pub use config::{NoiseModeName, PolicyKind, TrainConfig};
pub use metrics::{MetricRecord, RunMetrics};

use crate::actor::{policy_loss, Actor, ActionValue};
use crate::critic::CriticPair;
use crate::diffusion::{DiffusionConfig, DiffusionPolicy, NoiseNet};
use crate::entropy::{estimate_policy_entropy, AlphaState, EmConfig};
use crate::envs::{AnyEnv, Env};
use crate::error::{Error, Result};
use crate::gaussian::GaussianPolicy;
use crate::harness::evaluate;
use crate::numcore::{Activation, AdamConfig, AdamState, Checkpoint, Graph, Mlp, MlpVars, Tensor, Var};

/// Either policy family behind one [`Actor`] implementation.
#[derive(Clone, Debug)]
pub enum Policy {
    Diffusion(DiffusionPolicy<f64>),
    Gaussian(GaussianPolicy<f64>),
}

impl Actor<f64> for Policy {
    fn state_dim(&self) -> usize {
        match self {
            Policy::Diffusion(p) => p.state_dim(),
            Policy::Gaussian(p) => p.state_dim(),
        }
    }

    fn action_dim(&self) -> usize {
        match self {
            Policy::Diffusion(p) => Actor::action_dim(p),
            Policy::Gaussian(p) => p.action_dim(),
        }
    }

    fn net(&self) -> &Mlp<f64> {
        match self {
            Policy::Diffusion(p) => p.net(),
            Policy::Gaussian(p) => p.net(),
        }
    }

    fn net_mut(&mut self) -> &mut Mlp<f64> {
        match self {
            Policy::Diffusion(p) => p.net_mut(),
            Policy::Gaussian(p) => p.net_mut(),
        }
    }

    fn act<R: Rng + ?Sized>(&self, states: &Tensor<f64>, rng: &mut R) -> Result<Tensor<f64>> {
        match self {
            Policy::Diffusion(p) => p.act(states, rng),
            Policy::Gaussian(p) => p.act(states, rng),
        }
    }

    fn act_on<R: Rng + ?Sized>(&self, g: &mut Graph<f64>, vars: &MlpVars, states: Var, rng: &mut R) -> Result<Var> {
        match self {
            Policy::Diffusion(p) => p.act_on(g, vars, states, rng),
            Policy::Gaussian(p) => p.act_on(g, vars, states, rng),
        }
    }
}

/// Everything a checkpoint holds: networks, `α` and the run configuration.
#[derive(Clone, Debug)]
pub struct Agent {
    pub config: TrainConfig,
    pub policy: Policy,
    pub critic: CriticPair<f64>,
    pub alpha: AlphaState<f64>,
}

fn diffusion_config(c: &TrainConfig) -> DiffusionConfig {
    DiffusionConfig {
        steps: c.diffusion_steps,
        final_step_noise: c.final_step_noise,
        clip_grad: c.clip_grad,
    }
}

impl Agent {
    pub fn new<R: Rng + ?Sized>(config: &TrainConfig, state_dim: usize, action_dim: usize, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let policy = match config.policy {
            PolicyKind::Diffusion => {
                let net = NoiseNet::new(state_dim, action_dim, &config.actor_hidden, rng)?;
                Policy::Diffusion(DiffusionPolicy::new(net, diffusion_config(config))?)
            }
            PolicyKind::Gaussian => Policy::Gaussian(GaussianPolicy::new(state_dim, action_dim, &config.actor_hidden, rng)?),
        };
        let critic = CriticPair::new(state_dim, action_dim, &config.critic_hidden, rng)?;
        Ok(Self {
            config: config.clone(),
            policy,
            critic,
            alpha: Self::alpha_state(config, action_dim)?,
        })
    }

    fn alpha_state(config: &TrainConfig, action_dim: usize) -> Result<AlphaState<f64>> {
        AlphaState::new(
            config.starting_alpha(),
            config.alpha_lr,
            config.target_entropy_for(action_dim),
            config.lambda,
            config.noise_mode(),
        )
    }

    pub fn state_dim(&self) -> usize {
        self.policy.state_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.policy.action_dim()
    }

    /// Actions for a batch of states; exploration noise only when
    /// `eval_mode` is false.
    pub fn act<R: Rng + ?Sized>(&self, states: &Tensor<f64>, rng: &mut R, eval_mode: bool) -> Result<Tensor<f64>> {
        let mut a = self.policy.act(states, rng)?;
        self.alpha.apply_exploration_noise(&mut a, rng, eval_mode);
        Ok(a)
    }

    pub fn to_checkpoint(&self, iteration: u64) -> Checkpoint {
        let mut ck = Checkpoint::new();
        for (k, v) in self.config.entries() {
            ck.set_meta(&format!("config.{k}"), v);
        }
        ck.set_meta("iteration", iteration);
        ck.set_meta("alpha", self.alpha.alpha());
        ck.set_meta("state_dim", self.state_dim());
        ck.set_meta("action_dim", self.action_dim());
        ck.insert_mlp("actor", self.policy.net());
        ck.insert_mlp("critic.q1", &self.critic.q1);
        ck.insert_mlp("critic.q2", &self.critic.q2);
        let (t1, t2) = self.critic.targets();
        ck.insert_mlp("critic.target1", t1);
        ck.insert_mlp("critic.target2", t2);
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let mut config = TrainConfig::default();
        for (k, _) in TrainConfig::default().entries() {
            let v = ck
                .meta(&format!("config.{k}"))
                .ok_or_else(|| Error::Checkpoint(format!("missing config entry {k}")))?;
            config.set(k, v)?;
        }
        let state_dim: usize = ck.meta_parse("state_dim")?;
        let action_dim: usize = ck.meta_parse("action_dim")?;
        let policy = match config.policy {
            PolicyKind::Diffusion => {
                let net = NoiseNet::from_mlp(ck.mlp("actor", Activation::Mish)?, state_dim, action_dim)?;
                Policy::Diffusion(DiffusionPolicy::new(net, diffusion_config(&config))?)
            }
            PolicyKind::Gaussian => {
                let mut p = GaussianPolicy::new(state_dim, action_dim, &config.actor_hidden, &mut ChaCha8Rng::seed_from_u64(0))?;
                ck.load_into("actor", p.net_mut())?;
                Policy::Gaussian(p)
            }
        };
        let critic = CriticPair::from_nets(
            ck.mlp("critic.q1", Activation::Gelu)?,
            ck.mlp("critic.q2", Activation::Gelu)?,
            state_dim,
            action_dim,
        )?
        .with_targets(
            ck.mlp("critic.target1", Activation::Gelu)?,
            ck.mlp("critic.target2", Activation::Gelu)?,
        )?;
        let mut alpha = Self::alpha_state(&config, action_dim)?;
        let stored: f64 = ck.meta_parse("alpha")?;
        alpha = AlphaState::new(stored, alpha.lr, alpha.target_entropy, alpha.lambda, alpha.mode)?;
        Ok(Self {
            config,
            policy,
            critic,
            alpha,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }
}

/// How many of each update kind have run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct UpdateCounts {
    pub env_steps: u64,
    pub critic_updates: u64,
    pub policy_updates: u64,
    pub alpha_updates: u64,
    pub evaluations: u64,
}

/// Latest loss values, for metric emission.
#[derive(Clone, Copy, Debug, Default)]
struct Losses {
    critic: Option<f64>,
    policy: Option<f64>,
}

pub struct Trainer {
    pub agent: Agent,
    env: AnyEnv,
    eval_env: AnyEnv,
    buffer: ReplayBuffer,
    rng: ChaCha8Rng,
    eval_rng: ChaCha8Rng,
    actor_opt: AdamState<f64>,
    q1_opt: AdamState<f64>,
    q2_opt: AdamState<f64>,
    state: Vec<f64>,
    iteration: u64,
    counts: UpdateCounts,
    losses: Losses,
    episode_return: f64,
    metrics: RunMetrics,
    run_dir: Option<PathBuf>,
    checkpoints: Vec<PathBuf>,
}

impl Trainer {
    /// Build the agent and environments from `config`. With a `run_dir`
    /// the configuration echo, metrics CSV and checkpoints are written
    /// there.
    pub fn new(config: &TrainConfig, run_dir: Option<&Path>) -> Result<Self> {
        config.validate()?;
        let env = AnyEnv::by_name(&config.env, config.multigoal_spec())?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut eval_rng = ChaCha8Rng::seed_from_u64(config.seed);
        eval_rng.set_stream(1);
        let agent = Agent::new(config, env.state_dim(), env.action_dim(), &mut rng)?;
        let adam = |lr: f64| {
            AdamState::new(AdamConfig {
                max_grad_norm: config.max_grad_norm,
                ..AdamConfig::with_lr(lr)
            })
        };
        let metrics = match run_dir {
            Some(dir) => {
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                let echo = dir.join("config.txt");
                fs::write(&echo, config.to_text()).map_err(|e| Error::io(&echo, e))?;
                RunMetrics::with_csv(&dir.join("metrics.csv"))?
            }
            None => RunMetrics::new(),
        };
        let mut env = env;
        let state = env.reset(&mut rng);
        Ok(Self {
            eval_env: env.clone(),
            buffer: ReplayBuffer::new(config.buffer_capacity, env.state_dim(), env.action_dim())?,
            env,
            rng,
            eval_rng,
            actor_opt: adam(config.actor_lr),
            q1_opt: adam(config.critic_lr),
            q2_opt: adam(config.critic_lr),
            agent,
            state,
            iteration: 0,
            counts: UpdateCounts::default(),
            losses: Losses::default(),
            episode_return: 0.0,
            metrics,
            run_dir: run_dir.map(Path::to_path_buf),
            checkpoints: Vec::new(),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.agent.config
    }

    /// Environment steps taken so far.
    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn counts(&self) -> UpdateCounts {
        self.counts
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn metrics(&self) -> &RunMetrics {
        &self.metrics
    }

    pub fn into_parts(self) -> (Agent, RunMetrics, UpdateCounts) {
        let Trainer {
            agent, metrics, counts, ..
        } = self;
        (agent, metrics, counts)
    }

    fn progress(&self) -> f64 {
        self.iteration as f64 / self.config().total_steps.max(1) as f64
    }

    /// One environment step followed, once the buffer is warm, by one
    /// update step. Iterations are counted from 1.
    pub fn step(&mut self) -> Result<()> {
        self.iteration += 1;
        let it = self.iteration;
        let progress = self.progress();
        self.agent.alpha.set_progress(progress);

        let s = Tensor::row_vector(self.state.clone());
        let action = self.agent.act(&s, &mut self.rng, false)?.into_data();
        let out = self.env.step(&action).map_err(|e| Error::Env {
            step: it,
            message: e.to_string(),
        })?;
        if !out.reward.is_finite() {
            return Err(Error::Env {
                step: it,
                message: format!("non-finite reward {}", out.reward),
            });
        }
        self.counts.env_steps += 1;
        self.episode_return += out.reward;
        self.buffer.push(Transition {
            state: self.state.clone(),
            action,
            reward: out.reward * self.config().reward_scale,
            next_state: out.state.clone(),
            // A time-limit cut is not terminal: the target still bootstraps.
            done: out.terminal,
        })?;
        if out.done() {
            let ret = self.episode_return;
            self.metrics.record(it, "episode_return", ret)?;
            self.episode_return = 0.0;
            self.state = self.env.reset(&mut self.rng);
        } else {
            self.state = out.state;
        }

        if self.buffer.len() >= self.config().warmup.max(self.config().batch_size) {
            let r = self.update();
            self.guard(r)?;
        }
        if it % self.config().alpha_delay == 0 {
            let r = self.regulate_alpha();
            self.guard(r)?;
        }
        self.emit(it)
    }

    fn update(&mut self) -> Result<()> {
        let c = self.agent.config.clone();
        let batch = self.buffer.sample(c.batch_size, &mut self.rng)?;
        let next_actions = self.agent.act(&batch.next_states, &mut self.rng, false)?;
        let y = self.agent.critic.bellman_target(&batch, &next_actions, c.gamma)?;
        let loss = self.agent.critic.critic_loss(&batch.states, &batch.actions, &y)?;
        self.q1_opt.step(self.agent.critic.q1.params_mut(), &loss.grads_q1)?;
        self.q2_opt.step(self.agent.critic.q2.params_mut(), &loss.grads_q2)?;
        self.losses.critic = Some(loss.value);
        self.counts.critic_updates += 1;

        if self.counts.critic_updates % c.policy_delay == 0 {
            let pl = policy_loss(&self.agent.policy, &self.agent.critic, &batch.states, &mut self.rng)?;
            self.actor_opt.step(self.agent.policy.net_mut().params_mut(), &pl.grads)?;
            self.losses.policy = Some(pl.value);
            self.counts.policy_updates += 1;
        }
        self.agent.critic.soft_update(1.0 - c.rho);
        if !self.agent.critic.q1.is_finite() || !self.agent.policy.net().is_finite() {
            return Err(Error::numeric("non-finite parameters after update"));
        }
        Ok(())
    }

    /// Numeric faults abort the run after writing a checkpoint.
    fn guard<T>(&mut self, r: Result<T>) -> Result<T> {
        match r {
            Err(Error::NumericFault(m)) => self.abort(&m),
            other => other,
        }
    }

    fn abort<T>(&mut self, message: &str) -> Result<T> {
        let mut note = String::new();
        if let Some(dir) = &self.run_dir {
            let path = dir.join("abort.ckpt");
            self.agent.to_checkpoint(self.iteration).save(&path)?;
            note = format!("; state saved to {}", path.display());
        }
        self.metrics.flush()?;
        Err(Error::NumericFault(format!(
            "iteration {}: {message}{note}",
            self.iteration
        )))
    }

    fn regulate_alpha(&mut self) -> Result<()> {
        let c = self.agent.config.clone();
        if self.buffer.len() < c.entropy_states {
            return Ok(());
        }
        let states = self.buffer.sample_states(c.entropy_states, &mut self.rng)?;
        let em = EmConfig {
            components: c.gmm_components,
            ..EmConfig::default()
        };
        let est = estimate_policy_entropy(&self.agent.policy, &states, c.entropy_samples, &em, &mut self.rng)?;
        let progress = self.progress();
        if let Err(e) = self.agent.alpha.update_alpha(est.mean, progress) {
            log::warn!("iteration {}: {e}", self.iteration);
        }
        self.counts.alpha_updates += 1;
        self.metrics.record(self.iteration, "entropy", est.mean)?;
        Ok(())
    }

    fn emit(&mut self, it: u64) -> Result<()> {
        let c = &self.agent.config;
        let (metrics_every, eval_every, ckpt_every) = (c.metrics_interval, c.eval_interval, c.checkpoint_interval);
        if it % metrics_every == 0 {
            self.metrics.record(it, "alpha", self.agent.alpha.alpha())?;
            if let Some(v) = self.losses.critic {
                self.metrics.record(it, "critic_loss", v)?;
            }
            if let Some(v) = self.losses.policy {
                self.metrics.record(it, "policy_loss", v)?;
            }
        }
        if eval_every > 0 && it % eval_every == 0 {
            let ret = evaluate(&self.agent, &mut self.eval_env, self.agent.config.eval_episodes, &mut self.eval_rng)?;
            self.counts.evaluations += 1;
            self.metrics.record(it, "eval_return", ret)?;
        }
        if ckpt_every > 0 && it % ckpt_every == 0 {
            self.save_checkpoint(it)?;
        }
        Ok(())
    }

    fn save_checkpoint(&mut self, it: u64) -> Result<()> {
        let Some(dir) = self.run_dir.clone() else {
            return Ok(());
        };
        let path = dir.join(format!("ckpt-{it:08}.ckpt"));
        self.agent.to_checkpoint(it).save(&path)?;
        self.checkpoints.push(path);
        let keep = self.agent.config.keep_checkpoints.max(1);
        while self.checkpoints.len() > keep {
            let old = self.checkpoints.remove(0);
            fs::remove_file(&old).map_err(|e| Error::io(&old, e))?;
        }
        Ok(())
    }

    /// Run until `total_steps` iterations; writes `final.ckpt` when a run
    /// directory is set.
    pub fn run(&mut self) -> Result<()> {
        while self.iteration < self.config().total_steps {
            self.step()?;
        }
        if let Some(dir) = &self.run_dir {
            self.agent.to_checkpoint(self.iteration).save(&dir.join("final.ckpt"))?;
        }
        self.metrics.flush()
    }
}

/// Train from scratch per `config`.
pub fn train(config: &TrainConfig, run_dir: Option<&Path>) -> Result<(Agent, RunMetrics, UpdateCounts)> {
    let mut t = Trainer::new(config, run_dir)?;
    t.run()?;
    Ok(t.into_parts())
}

/// Fit `actor` to maximize a fixed critic over states drawn by `states`,
/// with no critic updates. Returns the final policy loss.
pub fn fit_actor_to_critic<A, Q, R, F>(actor: &mut A, critic: &Q, steps: usize, lr: f64, rng: &mut R, mut states: F) -> Result<f64>
where
    A: Actor<f64>,
    Q: ActionValue<f64> + ?Sized,
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> Tensor<f64>,
{
    let mut opt = AdamState::new(AdamConfig::with_lr(lr));
    let mut last = f64::NAN;
    for _ in 0..steps {
        let s = states(rng);
        let pl = policy_loss(actor, critic, &s, rng)?;
        opt.step(actor.net_mut().params_mut(), &pl.grads)?;
        last = pl.value;
    }
    Ok(last)
}
