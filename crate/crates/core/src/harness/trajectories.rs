//! Eval-mode rollouts from chosen start points, with the goal each reached.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use super::svg::Canvas;
use crate::envs::{Env, MultiGoal};
use crate::error::{Error, Result};
use crate::numcore::Tensor;
use crate::trainer::Agent;

#[derive(Clone, Debug, PartialEq)]
pub struct Rollout {
    pub start: usize,
    pub points: Vec<[f64; 2]>,
    pub goal: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySet {
    pub starts: Vec<[f64; 2]>,
    pub goals: Vec<[f64; 2]>,
    pub rollouts: Vec<Rollout>,
}

const PALETTE: [&str; 6] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

impl TrajectorySet {
    /// `counts[start][goal]`; the last column counts rollouts that reached
    /// no goal.
    pub fn histogram(&self) -> Vec<Vec<usize>> {
        let mut h = vec![vec![0; self.goals.len() + 1]; self.starts.len()];
        for r in &self.rollouts {
            h[r.start][r.goal.unwrap_or(self.goals.len())] += 1;
        }
        h
    }

    /// Number of different goals reached from one start.
    pub fn distinct_goals(&self, start: usize) -> usize {
        self.histogram()[start][..self.goals.len()].iter().filter(|&&c| c > 0).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("start,rollout,step,x,y\n");
        let mut counter = vec![0usize; self.starts.len()];
        for r in &self.rollouts {
            let k = counter[r.start];
            counter[r.start] += 1;
            for (t, p) in r.points.iter().enumerate() {
                let _ = writeln!(out, "{},{k},{t},{},{}", r.start, p[0], p[1]);
            }
        }
        out
    }

    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("start,sx,sy,goal,count\n");
        for (s, row) in self.histogram().iter().enumerate() {
            for (g, c) in row.iter().enumerate() {
                let label = if g == self.goals.len() { "none".to_string() } else { g.to_string() };
                let _ = writeln!(out, "{s},{},{},{label},{c}", self.starts[s][0], self.starts[s][1]);
            }
        }
        out
    }

    pub fn to_svg(&self, half_width: f64) -> Canvas {
        let mut c = Canvas::new(600.0, -half_width, half_width);
        for r in &self.rollouts {
            c.polyline(&r.points, PALETTE[r.start % PALETTE.len()], 0.35);
        }
        for g in &self.goals {
            c.circle(g[0], g[1], 5.0, "limegreen");
        }
        for s in &self.starts {
            c.circle(s[0], s[1], 3.0, "black");
        }
        c
    }
}

/// `n` eval-mode rollouts from each start. With `out_dir`, writes
/// `trajectories.csv`, `goal_histogram.csv` and `trajectories.svg`.
pub fn sample_trajectories<R: Rng + ?Sized>(
    agent: &Agent,
    env: &mut MultiGoal,
    starts: &[[f64; 2]],
    n: usize,
    rng: &mut R,
    out_dir: Option<&Path>,
) -> Result<TrajectorySet> {
    if agent.state_dim() != 2 || agent.action_dim() != 2 {
        return Err(Error::dim("trajectory fans need a planar state and action"));
    }
    let mut set = TrajectorySet {
        starts: starts.to_vec(),
        goals: env.spec.goals.clone(),
        rollouts: Vec::with_capacity(starts.len() * n),
    };
    for (k, &start) in starts.iter().enumerate() {
        for _ in 0..n {
            let mut s = env.reset_at(start)?;
            let mut points = vec![start];
            let mut goal = None;
            loop {
                let a = agent.act(&Tensor::row_vector(s), rng, true)?;
                let out = env.step(a.data())?;
                points.push([out.state[0], out.state[1]]);
                if out.terminal {
                    goal = out.info.reached_goal;
                }
                if out.done() {
                    break;
                }
                s = out.state;
            }
            set.rollouts.push(Rollout { start: k, points, goal });
        }
    }
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, text: String| {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
        };
        write("trajectories.csv", set.to_csv())?;
        write("goal_histogram.csv", set.histogram_csv())?;
        set.to_svg(env.spec.half_width).save(&dir.join("trajectories.svg"))?;
    }
    Ok(set)
}

/// Parse `x,y;x,y;...` (or one pair per line).
pub fn parse_starts(text: &str) -> Result<Vec<[f64; 2]>> {
    text.split([';', '\n'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|pair| {
            let v: Vec<f64> = pair
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::config(format!("bad start point {pair:?}")))?;
            match v[..] {
                [x, y] => Ok([x, y]),
                _ => Err(Error::config(format!("start point {pair:?} needs two coordinates"))),
            }
        })
        .collect()
}
