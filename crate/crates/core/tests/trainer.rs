use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dacer::actor::Actor;
use dacer::envs::bandit::bandit_reward;
use dacer::trainer::{train, Agent, NoiseModeName, TrainConfig, Trainer};
use dacer::Error;

fn small(env: &str) -> TrainConfig {
    TrainConfig {
        env: env.into(),
        seed: 3,
        total_steps: 400,
        warmup: 100,
        batch_size: 16,
        diffusion_steps: 5,
        actor_hidden: vec![8, 8],
        critic_hidden: vec![8, 8],
        entropy_samples: 40,
        entropy_states: 4,
        alpha_delay: 100,
        eval_interval: 200,
        eval_episodes: 2,
        metrics_interval: 50,
        checkpoint_interval: 0,
        buffer_capacity: 10_000,
        ..TrainConfig::default()
    }
}

fn params(agent: &Agent) -> Vec<f64> {
    let mut out: Vec<f64> = agent.policy.net().params().flat_map(|t| t.data().to_vec()).collect();
    for net in [&agent.critic.q1, &agent.critic.q2] {
        out.extend(net.params().flat_map(|t| t.data().to_vec()));
    }
    out
}

#[test]
fn no_updates_before_warmup_leaves_parameters_untouched() {
    let c = TrainConfig {
        warmup: 1_000,
        total_steps: 300,
        ..small("multigoal")
    };
    let mut t = Trainer::new(&c, None).unwrap();
    t.run().unwrap();
    assert_eq!(t.buffer().len(), 300);
    assert_eq!(t.counts().critic_updates, 0);
    let fresh = Agent::new(&c, 2, 2, &mut ChaCha8Rng::seed_from_u64(c.seed)).unwrap();
    let (trained, _, _) = t.into_parts();
    assert_eq!(params(&trained), params(&fresh));
}

#[test]
fn updates_start_exactly_at_warmup() {
    let c = small("bandit");
    let mut t = Trainer::new(&c, None).unwrap();
    for _ in 0..99 {
        t.step().unwrap();
    }
    assert_eq!(t.counts().critic_updates, 0);
    t.step().unwrap();
    assert_eq!(t.counts().critic_updates, 1);
}

#[test]
fn alpha_regulated_only_on_the_delay_boundary() {
    let c = TrainConfig {
        alpha_delay: 10_000,
        warmup: 20_000,
        total_steps: 10_000,
        eval_interval: 0,
        ..small("bandit")
    };
    let mut t = Trainer::new(&c, None).unwrap();
    for _ in 0..9_999 {
        t.step().unwrap();
    }
    assert_eq!(t.counts().alpha_updates, 0);
    t.step().unwrap();
    assert_eq!(t.counts().alpha_updates, 1);
    assert_eq!(t.metrics().series("entropy").len(), 1);
    assert_eq!(t.metrics().series("entropy")[0].0, 10_000);
}

#[test]
fn critic_to_policy_update_ratio_is_the_delay() {
    let mut t = Trainer::new(&small("bandit"), None).unwrap();
    t.run().unwrap();
    let c = t.counts();
    assert_eq!(c.critic_updates, 301);
    assert!((c.critic_updates as i64 - 2 * c.policy_updates as i64).abs() <= 1, "{c:?}");
}

#[test]
fn stored_rewards_are_scaled_environment_rewards() {
    let mut t = Trainer::new(&small("bandit"), None).unwrap();
    t.run().unwrap();
    let b = t.buffer();
    for i in 0..b.len() {
        let tr = b.get(i).unwrap();
        assert!(tr.action[0].abs() <= 1.0);
        assert_eq!(tr.reward, bandit_reward(tr.action[0]) * 0.2);
        assert!(tr.done);
    }
}

#[test]
fn same_seed_same_run() {
    let c = small("multigoal");
    let (a1, m1, k1) = train(&c, None).unwrap();
    let (a2, m2, k2) = train(&c, None).unwrap();
    assert_eq!(m1, m2);
    assert_eq!(k1, k2);
    assert_eq!(params(&a1), params(&a2));
    assert!(!m1.series("critic_loss").is_empty());
    let c = TrainConfig { seed: 4, ..c };
    let (a3, _, _) = train(&c, None).unwrap();
    assert_ne!(params(&a1), params(&a3));
}

#[test]
fn run_directory_contents_and_checkpoint_rotation() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let c = TrainConfig {
        checkpoint_interval: 50,
        keep_checkpoints: 3,
        ..small("multigoal")
    };
    let (agent, metrics, _) = train(&c, Some(&run)).unwrap();

    let echoed = TrainConfig::from_file(&run.join("config.txt")).unwrap();
    assert_eq!(echoed, c);
    let rows = dacer::trainer::RunMetrics::read_csv(&run.join("metrics.csv")).unwrap();
    assert_eq!(rows.as_slice(), metrics.records());

    let mut ckpts: Vec<_> = std::fs::read_dir(&run)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("ckpt-"))
        .collect();
    ckpts.sort();
    assert_eq!(ckpts, ["ckpt-00000300.ckpt", "ckpt-00000350.ckpt", "ckpt-00000400.ckpt"]);

    let loaded = Agent::load(&run.join("final.ckpt")).unwrap();
    assert_eq!(params(&loaded), params(&agent));
    assert_eq!(loaded.alpha.alpha(), agent.alpha.alpha());
    assert_eq!(loaded.config, c);
    let (t1, t2) = loaded.critic.targets();
    assert_eq!(t1, agent.critic.targets().0);
    assert_eq!(t2, agent.critic.targets().1);
}

#[test]
fn divergence_aborts_with_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let c = TrainConfig {
        critic_lr: 1e300,
        ..small("bandit")
    };
    let err = train(&c, Some(dir.path())).unwrap_err();
    assert!(matches!(err, Error::NumericFault(_)), "{err}");
    assert!(dir.path().join("abort.ckpt").is_file(), "{err}");
}

#[test]
fn every_noise_mode_emits_the_same_schema() {
    let names = |mode| {
        let c = TrainConfig {
            noise_mode: mode,
            ..small("multigoal")
        };
        let (agent, m, _) = train(&c, None).unwrap();
        (agent.alpha.alpha(), m.metric_names())
    };
    let (_, adaptive) = names(NoiseModeName::Adaptive);
    let (fixed_alpha, fixed) = names(NoiseModeName::Fixed);
    let (linear_alpha, linear) = names(NoiseModeName::Linear);
    let (off_alpha, off) = names(NoiseModeName::Off);
    assert_eq!(adaptive, fixed);
    assert_eq!(adaptive, linear);
    assert_eq!(adaptive, off);
    assert_eq!(fixed_alpha, 0.1);
    assert!((linear_alpha - 0.1).abs() < 1e-12);
    assert_eq!(off_alpha, 0.0);
    for m in ["alpha", "critic_loss", "policy_loss", "entropy", "eval_return", "episode_return"] {
        assert!(adaptive.iter().any(|n| n == m), "missing {m}");
    }
}
