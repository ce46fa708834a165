use rand::Rng;

use crate::critic::BellmanBatch;
use crate::error::{Error, Result};
use crate::numcore::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    /// The executed action, after exploration noise.
    pub action: Vec<f64>,
    /// Scaled reward.
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// Terminal (not merely truncated).
    pub done: bool,
}

/// Fixed-capacity FIFO ring of transitions with uniform sampling.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    state_dim: usize,
    action_dim: usize,
    states: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    next_states: Vec<f64>,
    dones: Vec<bool>,
    cursor: usize,
    len: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, state_dim: usize, action_dim: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::config("replay capacity must be positive"));
        }
        Ok(Self {
            capacity,
            state_dim,
            action_dim,
            states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_states: Vec::new(),
            dones: Vec::new(),
            cursor: 0,
            len: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        if t.state.len() != self.state_dim || t.next_state.len() != self.state_dim || t.action.len() != self.action_dim {
            return Err(Error::dim("transition does not match buffer dimensions"));
        }
        if !t.reward.is_finite() {
            return Err(Error::numeric("non-finite reward"));
        }
        let (sd, ad) = (self.state_dim, self.action_dim);
        if self.len < self.capacity {
            self.states.extend_from_slice(&t.state);
            self.actions.extend_from_slice(&t.action);
            self.rewards.push(t.reward);
            self.next_states.extend_from_slice(&t.next_state);
            self.dones.push(t.done);
            self.len += 1;
        } else {
            let i = self.cursor;
            self.states[i * sd..(i + 1) * sd].copy_from_slice(&t.state);
            self.actions[i * ad..(i + 1) * ad].copy_from_slice(&t.action);
            self.rewards[i] = t.reward;
            self.next_states[i * sd..(i + 1) * sd].copy_from_slice(&t.next_state);
            self.dones[i] = t.done;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        Ok(())
    }

    /// Storage slot `i` (not insertion order once the ring has wrapped).
    pub fn get(&self, i: usize) -> Option<Transition> {
        if i >= self.len {
            return None;
        }
        let (sd, ad) = (self.state_dim, self.action_dim);
        Some(Transition {
            state: self.states[i * sd..(i + 1) * sd].to_vec(),
            action: self.actions[i * ad..(i + 1) * ad].to_vec(),
            reward: self.rewards[i],
            next_state: self.next_states[i * sd..(i + 1) * sd].to_vec(),
            done: self.dones[i],
        })
    }

    /// Uniform indices, with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.len < n || self.len == 0 {
            return Err(Error::contract(format!("cannot sample {n} from {} transitions", self.len)));
        }
        Ok((0..n).map(|_| rng.random_range(0..self.len)).collect())
    }

    pub fn gather(&self, idx: &[usize]) -> BellmanBatch<f64> {
        let (sd, ad, n) = (self.state_dim, self.action_dim, idx.len());
        let pick = |src: &[f64], w: usize| Tensor::from_fn(n, w, |r, c| src[idx[r] * w + c]);
        BellmanBatch {
            states: pick(&self.states, sd),
            actions: pick(&self.actions, ad),
            rewards: idx.iter().map(|&i| self.rewards[i]).collect(),
            next_states: pick(&self.next_states, sd),
            dones: idx.iter().map(|&i| self.dones[i]).collect(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<BellmanBatch<f64>> {
        let idx = self.sample_indices(n, rng)?;
        Ok(self.gather(&idx))
    }

    /// States of `n` uniformly drawn transitions.
    pub fn sample_states<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Tensor<f64>> {
        let idx = self.sample_indices(n, rng)?;
        let sd = self.state_dim;
        Ok(Tensor::from_fn(n, sd, |r, c| self.states[idx[r] * sd + c]))
    }
}
