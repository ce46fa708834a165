//! Evaluation protocol and exporters for trained checkpoints.

pub mod landscape;
pub mod protocol;
pub mod report;
pub mod svg;
pub mod trajectories;

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::RngCore;

pub use landscape::{detect_peaks, export_q_landscape, landscape_with, LandscapeGrid, Peak};
pub use protocol::{aggregate, final_metric, EvalReport, FINAL_WINDOW};
pub use report::{report_runs, RunSummary};
pub use trajectories::{sample_trajectories, Rollout, TrajectorySet};

use crate::envs::Env;
use crate::error::{Error, Result};
use crate::numcore::Tensor;
use crate::trainer::Agent;

/// Mean unscaled return over `episodes` full episodes of `act`.
pub fn evaluate_with<E, R, F>(env: &mut E, episodes: usize, rng: &mut R, mut act: F) -> Result<f64>
where
    E: Env + ?Sized,
    R: RngCore,
    F: FnMut(&[f64], &mut R) -> Result<Vec<f64>>,
{
    if episodes == 0 {
        return Err(Error::contract("evaluation needs at least one episode"));
    }
    let mut total = 0.0;
    for _ in 0..episodes {
        let mut s = env.reset(rng);
        loop {
            let a = act(&s, rng)?;
            let out = env.step(&a)?;
            total += out.reward;
            if out.done() {
                break;
            }
            s = out.state;
        }
    }
    Ok(total / episodes as f64)
}

/// [`evaluate_with`] for an agent in evaluation mode (no exploration noise).
pub fn evaluate<E, R>(agent: &Agent, env: &mut E, episodes: usize, rng: &mut R) -> Result<f64>
where
    E: Env + ?Sized,
    R: RngCore,
{
    evaluate_with(env, episodes, rng, |s, rng| {
        Ok(agent.act(&Tensor::row_vector(s.to_vec()), rng, true)?.into_data())
    })
}

/// `<root>/<env>-seed<seed>-<unix seconds>`.
pub fn run_dir_name(root: &Path, env: &str, seed: u64) -> PathBuf {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    root.join(format!("{env}-seed{seed}-{secs}"))
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::envs::BimodalBandit;

    #[test]
    fn zero_episodes_rejected() {
        let mut env = BimodalBandit::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = evaluate_with(&mut env, 0, &mut rng, |_, _| Ok(vec![0.0]));
        assert!(matches!(r, Err(Error::Contract(_))));
    }

    #[test]
    fn single_episode_is_one_rollout() {
        let mut env = BimodalBandit::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = evaluate_with(&mut env, 1, &mut rng, |_, _| Ok(vec![0.6])).unwrap();
        assert!((r - crate::envs::bandit::bandit_reward(0.6)).abs() < 1e-15);
    }

    #[test]
    fn repeatable_under_a_seed() {
        let run = || {
            let mut env = BimodalBandit::new();
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            evaluate_with(&mut env, 50, &mut rng, |_, rng| Ok(vec![rng.random_range(-1.0..1.0)])).unwrap()
        };
        assert_eq!(run(), run());
    }
}
