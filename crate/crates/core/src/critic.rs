//! Twin Q-networks with slowly tracking target copies.

use rand::Rng;

use crate::actor::ActionValue;
use crate::error::{Error, Result};
use crate::numcore::{Activation, Graph, Mlp, Scalar, Tensor, Var};

#[derive(Clone, Debug, PartialEq)]
pub struct CriticPair<S> {
    pub q1: Mlp<S>,
    pub q2: Mlp<S>,
    target1: Mlp<S>,
    target2: Mlp<S>,
    state_dim: usize,
    action_dim: usize,
}

/// `(s, a, r, s', done)` columns for one critic update.
#[derive(Clone, Debug)]
pub struct BellmanBatch<S> {
    pub states: Tensor<S>,
    pub actions: Tensor<S>,
    pub rewards: Vec<S>,
    pub next_states: Tensor<S>,
    pub dones: Vec<bool>,
}

impl<S: Scalar> BellmanBatch<S> {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.rewards.len();
        if self.states.rows() != n || self.actions.rows() != n || self.next_states.rows() != n || self.dones.len() != n {
            return Err(Error::dim("batch columns have different lengths"));
        }
        if self.rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::numeric("non-finite reward in batch"));
        }
        Ok(())
    }
}

/// `y_i = r_i + γ(1 − done_i)·min(q1'_i, q2'_i)`.
pub fn bellman_targets<S: Scalar>(rewards: &[S], dones: &[bool], next_q1: &[S], next_q2: &[S], gamma: S) -> Result<Vec<S>> {
    let n = rewards.len();
    if dones.len() != n || next_q1.len() != n || next_q2.len() != n {
        return Err(Error::dim("bellman target inputs have different lengths"));
    }
    let y: Vec<S> = (0..n)
        .map(|i| {
            let cont = if dones[i] { S::zero() } else { S::one() };
            rewards[i] + gamma * cont * next_q1[i].min(next_q2[i])
        })
        .collect();
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::numeric(format!("non-finite Bellman target at row {i}")));
    }
    Ok(y)
}

/// `target ← retention·target + (1 − retention)·online`, elementwise.
pub fn soft_blend<S: Scalar>(target: &mut [S], online: &[S], retention: S) {
    let keep = retention;
    let take = S::one() - retention;
    for (t, &o) in target.iter_mut().zip(online) {
        *t = keep * *t + take * o;
    }
}

fn hcat<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Tensor<S> {
    Tensor::from_fn(a.rows(), a.cols() + b.cols(), |i, j| {
        if j < a.cols() {
            a.at(i, j)
        } else {
            b.at(i, j - a.cols())
        }
    })
}

#[derive(Clone, Debug)]
pub struct CriticLoss<S> {
    pub value: S,
    pub grads_q1: Vec<Tensor<S>>,
    pub grads_q2: Vec<Tensor<S>>,
}

impl<S: Scalar> CriticPair<S> {
    pub fn new<R: Rng + ?Sized>(state_dim: usize, action_dim: usize, hidden: &[usize], rng: &mut R) -> Result<Self> {
        let mut sizes = vec![state_dim + action_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let q1 = Mlp::new(&sizes, Activation::Gelu, rng)?;
        let q2 = Mlp::new(&sizes, Activation::Gelu, rng)?;
        Self::from_nets(q1, q2, state_dim, action_dim)
    }

    /// Targets start as copies of the online networks.
    pub fn from_nets(q1: Mlp<S>, q2: Mlp<S>, state_dim: usize, action_dim: usize) -> Result<Self> {
        for q in [&q1, &q2] {
            if q.input_dim() != state_dim + action_dim || q.output_dim() != 1 || q.sizes() != q1.sizes() {
                return Err(Error::dim(format!("critic network {:?} does not fit", q.sizes())));
            }
        }
        Ok(Self {
            target1: q1.clone(),
            target2: q2.clone(),
            q1,
            q2,
            state_dim,
            action_dim,
        })
    }

    pub fn with_targets(mut self, target1: Mlp<S>, target2: Mlp<S>) -> Result<Self> {
        if target1.sizes() != self.q1.sizes() || target2.sizes() != self.q2.sizes() {
            return Err(Error::dim("target networks must mirror the online networks"));
        }
        self.target1 = target1;
        self.target2 = target2;
        Ok(self)
    }

    pub fn targets(&self) -> (&Mlp<S>, &Mlp<S>) {
        (&self.target1, &self.target2)
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    fn eval(net: &Mlp<S>, states: &Tensor<S>, actions: &Tensor<S>) -> Result<Vec<S>> {
        if states.rows() != actions.rows() {
            return Err(Error::dim("states and actions have different batch sizes"));
        }
        Ok(net.forward(&hcat(states, actions))?.into_data())
    }

    /// Online `(Q1, Q2)` per row.
    pub fn q_values(&self, states: &Tensor<S>, actions: &Tensor<S>) -> Result<(Vec<S>, Vec<S>)> {
        Ok((Self::eval(&self.q1, states, actions)?, Self::eval(&self.q2, states, actions)?))
    }

    pub fn min_q(&self, states: &Tensor<S>, actions: &Tensor<S>) -> Result<Vec<S>> {
        let (a, b) = self.q_values(states, actions)?;
        Ok(a.into_iter().zip(b).map(|(x, y)| x.min(y)).collect())
    }

    /// Target `(Q1', Q2')` per row.
    pub fn target_values(&self, states: &Tensor<S>, actions: &Tensor<S>) -> Result<(Vec<S>, Vec<S>)> {
        Ok((
            Self::eval(&self.target1, states, actions)?,
            Self::eval(&self.target2, states, actions)?,
        ))
    }

    /// Bellman targets from the target critics at `(s', a')`. Nothing is
    /// recorded, so no gradient can reach `y`.
    pub fn bellman_target(&self, batch: &BellmanBatch<S>, next_actions: &Tensor<S>, gamma: S) -> Result<Vec<S>> {
        batch.validate()?;
        let (n1, n2) = self.target_values(&batch.next_states, next_actions)?;
        bellman_targets(&batch.rewards, &batch.dones, &n1, &n2, gamma)
    }

    /// `mean_i Σ_{k∈{1,2}} (y_i − Q_k(s_i, a_i))²` and its gradients.
    pub fn critic_loss(&self, states: &Tensor<S>, actions: &Tensor<S>, targets: &[S]) -> Result<CriticLoss<S>> {
        let n = targets.len();
        if n == 0 {
            return Err(Error::contract("critic loss on an empty batch"));
        }
        if states.rows() != n || actions.rows() != n {
            return Err(Error::dim("critic batch columns have different lengths"));
        }
        let mut g = Graph::new();
        let v1 = self.q1.bind(&mut g);
        let v2 = self.q2.bind(&mut g);
        let x = g.constant(hcat(states, actions));
        let y = g.constant(Tensor::new(vec![n, 1], targets.to_vec())?);
        let q1 = self.q1.forward_on(&mut g, &v1, x)?;
        let q2 = self.q2.forward_on(&mut g, &v2, x)?;
        let d1 = g.sub(y, q1)?;
        let d2 = g.sub(y, q2)?;
        let s1 = g.square(d1);
        let s2 = g.square(d2);
        let both = g.add(s1, s2)?;
        let loss = g.mean(both);
        let value = g.value(loss).item()?;
        if !value.is_finite() {
            return Err(Error::numeric("non-finite critic loss"));
        }
        let mut grads = g.backward(loss)?;
        Ok(CriticLoss {
            value,
            grads_q1: self.q1.grads_from(&mut grads, &v1),
            grads_q2: self.q2.grads_from(&mut grads, &v2),
        })
    }

    /// `φ' ← retention·φ' + (1 − retention)·φ` for both targets.
    pub fn soft_update(&mut self, retention: S) {
        for (target, online) in [(&mut self.target1, &self.q1), (&mut self.target2, &self.q2)] {
            for (t, o) in target.params_mut().zip(online.params()) {
                soft_blend(t.data_mut(), o.data(), retention);
            }
        }
    }

    /// Euclidean distance between online and target parameters.
    pub fn target_gap(&self) -> S {
        [(&self.target1, &self.q1), (&self.target2, &self.q2)]
            .iter()
            .flat_map(|(t, o)| t.params().zip(o.params()))
            .flat_map(|(t, o)| t.data().iter().zip(o.data()).map(|(&a, &b)| (a - b) * (a - b)))
            .sum::<S>()
            .sqrt()
    }
}

impl<S: Scalar> ActionValue<S> for CriticPair<S> {
    /// `min(Q1, Q2)` of the online critics, frozen.
    fn value_on(&self, g: &mut Graph<S>, states: Var, actions: Var) -> Result<Var> {
        let x = g.concat_cols(&[states, actions])?;
        let v1 = self.q1.bind_frozen(g);
        let v2 = self.q2.bind_frozen(g);
        let q1 = self.q1.forward_on(g, &v1, x)?;
        let q2 = self.q2.forward_on(g, &v2, x)?;
        g.minimum(q1, q2)
    }
}
