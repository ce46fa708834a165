use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dacer::envs::{AnyEnv, MultiGoal};
use dacer::harness::landscape::PEAK_MERGE_RADIUS;
use dacer::harness::report::format_table;
use dacer::harness::trajectories::parse_starts;
use dacer::harness::{evaluate, export_q_landscape, report_runs, run_dir_name, sample_trajectories};
use dacer::trainer::{train, Agent, NoiseModeName, TrainConfig};
use dacer::{Error, Result};

#[derive(Parser)]
#[command(name = "dacer", version, about = "Diffusion actor-critic with an entropy regulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    Adaptive,
    Fixed,
    Linear,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent; outputs go to <runs>/<env>-seed<n>-<timestamp>.
    Train {
        /// key=value file; unset keys keep their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        env: Option<String>,
        #[arg(long, value_enum)]
        noise_mode: Option<NoiseArg>,
        #[arg(long)]
        diffusion_steps: Option<usize>,
        #[arg(long, default_value = "runs")]
        runs: PathBuf,
    },
    /// Mean return of a checkpoint over full episodes, without exploration noise.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write the value landscape (CSV, SVG) and its peaks.
    ExportQ {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 101)]
        resolution: usize,
        /// Defaults to `landscape/` beside the checkpoint.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Roll out from start points and record where each rollout ends.
    Trajectories {
        #[arg(long)]
        checkpoint: PathBuf,
        /// `x,y;x,y;...`, or a file with one `x,y` per line.
        #[arg(long)]
        starts: String,
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// Defaults to `trajectories/` beside the checkpoint.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Final-window score per configuration, mean and std across seeds.
    Report {
        #[arg(long)]
        runs: PathBuf,
    },
}

fn beside(checkpoint: &Path, name: &str) -> PathBuf {
    checkpoint.parent().unwrap_or(Path::new(".")).join(name)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            config,
            seed,
            env,
            noise_mode,
            diffusion_steps,
            runs,
        } => {
            let mut c = match config {
                Some(p) => TrainConfig::from_file(&p)?,
                None => TrainConfig::default(),
            };
            if let Some(s) = seed {
                c.seed = s;
            }
            if let Some(e) = env {
                c.env = e;
            }
            if let Some(m) = noise_mode {
                c.noise_mode = match m {
                    NoiseArg::Adaptive => NoiseModeName::Adaptive,
                    NoiseArg::Fixed => NoiseModeName::Fixed,
                    NoiseArg::Linear => NoiseModeName::Linear,
                    NoiseArg::Off => NoiseModeName::Off,
                };
            }
            if let Some(t) = diffusion_steps {
                c.diffusion_steps = t;
            }
            c.validate()?;
            let dir = run_dir_name(&runs, &c.env, c.seed);
            let (_, metrics, counts) = train(&c, Some(&dir))?;
            let last = metrics.series("eval_return").last().map(|&(_, r)| r);
            println!("run directory: {}", dir.display());
            println!(
                "env steps {}, critic updates {}, policy updates {}, alpha updates {}",
                counts.env_steps, counts.critic_updates, counts.policy_updates, counts.alpha_updates
            );
            if let Some(r) = last {
                println!("last evaluation return: {r:.4}");
            }
        }
        Command::Eval {
            checkpoint,
            episodes,
            seed,
        } => {
            let agent = Agent::load(&checkpoint)?;
            let mut env = AnyEnv::by_name(&agent.config.env, agent.config.multigoal_spec())?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ret = evaluate(&agent, &mut env, episodes, &mut rng)?;
            println!("mean return over {episodes} episodes: {ret:.6}");
        }
        Command::ExportQ {
            checkpoint,
            resolution,
            out,
            seed,
        } => {
            let agent = Agent::load(&checkpoint)?;
            let out = out.unwrap_or_else(|| beside(&checkpoint, "landscape"));
            let goals = agent.config.multigoal_spec().goals;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (_, peaks) = export_q_landscape(&agent, resolution, &goals, &mut rng, Some(&out))?;
            println!("{} peaks (merge radius {PEAK_MERGE_RADIUS}):", peaks.len());
            for p in &peaks {
                println!("  ({:.3}, {:.3})  q = {:.4}  [{} maxima]", p.x, p.y, p.q, p.members);
            }
            println!("written to {}", out.display());
        }
        Command::Trajectories {
            checkpoint,
            starts,
            n,
            out,
            seed,
        } => {
            let agent = Agent::load(&checkpoint)?;
            let text = if Path::new(&starts).is_file() {
                std::fs::read_to_string(&starts).map_err(|e| Error::Io {
                    path: PathBuf::from(&starts),
                    source: e,
                })?
            } else {
                starts
            };
            let starts = parse_starts(&text)?;
            let out = out.unwrap_or_else(|| beside(&checkpoint, "trajectories"));
            let mut env = MultiGoal::new(agent.config.multigoal_spec());
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let set = sample_trajectories(&agent, &mut env, &starts, n, &mut rng, Some(&out))?;
            for (k, row) in set.histogram().iter().enumerate() {
                println!(
                    "start ({}, {}): goals {:?}, none {}, distinct {}",
                    set.starts[k][0],
                    set.starts[k][1],
                    &row[..set.goals.len()],
                    row[set.goals.len()],
                    set.distinct_goals(k)
                );
            }
            println!("written to {}", out.display());
        }
        Command::Report { runs } => {
            let rows = report_runs(&runs)?;
            print!("{}", format_table(&rows));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
