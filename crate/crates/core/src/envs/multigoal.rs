//! A point mass on the square `[−w, w]²` that must reach one of four goals
//! on the axes.
//!
//! Dynamics are `s' = clip(s + scale·a)`. The reward is the negative
//! distance from `s'` to the nearest goal minus a quadratic action cost;
//! the episode terminates inside the goal radius and truncates at the
//! horizon.

use rand::RngCore;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

use super::{Env, EnvStep, StepInfo};

#[derive(Clone, Debug, PartialEq)]
pub struct MultiGoalSpec {
    pub goals: Vec<[f64; 2]>,
    pub half_width: f64,
    pub horizon: usize,
    pub action_scale: f64,
    pub action_cost: f64,
    pub goal_radius: f64,
    pub reset_std: f64,
}

impl Default for MultiGoalSpec {
    fn default() -> Self {
        Self {
            goals: vec![[0.0, 5.0], [0.0, -5.0], [5.0, 0.0], [-5.0, 0.0]],
            half_width: 7.0,
            horizon: 30,
            action_scale: 1.0,
            action_cost: 0.05,
            goal_radius: 0.5,
            reset_std: 0.5,
        }
    }
}

impl MultiGoalSpec {
    /// `(distance, index)` of the goal nearest to `p`.
    pub fn nearest_goal(&self, p: [f64; 2]) -> (f64, usize) {
        self.goals
            .iter()
            .enumerate()
            .map(|(i, g)| (((p[0] - g[0]).powi(2) + (p[1] - g[1]).powi(2)).sqrt(), i))
            .fold((f64::INFINITY, 0), |best, cur| if cur.0 < best.0 { cur } else { best })
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p.iter().all(|c| c.abs() <= self.half_width)
    }

    fn clip(&self, p: [f64; 2]) -> [f64; 2] {
        p.map(|c| c.clamp(-self.half_width, self.half_width))
    }

    /// Reward for landing on `next` after applying `action`.
    pub fn reward(&self, next: [f64; 2], action: [f64; 2]) -> f64 {
        -self.nearest_goal(next).0 - self.action_cost * (action[0].powi(2) + action[1].powi(2))
    }
}

#[derive(Clone, Debug)]
pub struct MultiGoal {
    pub spec: MultiGoalSpec,
    state: [f64; 2],
    t: usize,
    active: bool,
    clipped_actions: u64,
}

impl MultiGoal {
    pub fn new(spec: MultiGoalSpec) -> Self {
        Self {
            spec,
            state: [0.0, 0.0],
            t: 0,
            active: false,
            clipped_actions: 0,
        }
    }

    /// Start an episode at a chosen point.
    pub fn reset_at(&mut self, start: [f64; 2]) -> Result<Vec<f64>> {
        if !self.spec.contains(start) || start.iter().any(|c| !c.is_finite()) {
            return Err(Error::contract(format!("start {start:?} lies outside the plane")));
        }
        self.state = start;
        self.t = 0;
        self.active = true;
        Ok(start.to_vec())
    }

    /// Actions that arrived outside `[−1, 1]²` and were clipped.
    pub fn clipped_actions(&self) -> u64 {
        self.clipped_actions
    }

    pub fn position(&self) -> [f64; 2] {
        self.state
    }
}

impl Env for MultiGoal {
    fn name(&self) -> &str {
        "multigoal"
    }

    fn state_dim(&self) -> usize {
        2
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        let normal = Normal::new(0.0, self.spec.reset_std).expect("finite std");
        let p = self.spec.clip([normal.sample(rng), normal.sample(rng)]);
        self.reset_at(p).expect("clipped start is inside")
    }

    fn step(&mut self, action: &[f64]) -> Result<EnvStep> {
        if !self.active {
            return Err(Error::contract("step on a finished episode; reset first"));
        }
        if action.len() != 2 || action.iter().any(|a| !a.is_finite()) {
            return Err(Error::contract(format!("bad action {action:?}")));
        }
        let mut a = [action[0], action[1]];
        if a.iter().any(|c| c.abs() > 1.0) {
            self.clipped_actions += 1;
            log::warn!("action {a:?} outside [-1, 1]^2 clipped");
            a = a.map(|c| c.clamp(-1.0, 1.0));
        }
        let s = self.spec.action_scale;
        let next = self.spec.clip([self.state[0] + s * a[0], self.state[1] + s * a[1]]);
        let (dist, goal) = self.spec.nearest_goal(next);
        let reward = self.spec.reward(next, a);
        self.state = next;
        self.t += 1;
        let terminal = dist < self.spec.goal_radius;
        let truncated = !terminal && self.t >= self.spec.horizon;
        self.active = !(terminal || truncated);
        Ok(EnvStep {
            state: next.to_vec(),
            reward,
            terminal,
            truncated,
            info: StepInfo {
                distance_to_goal: Some(dist),
                reached_goal: terminal.then_some(goal),
            },
        })
    }
}
