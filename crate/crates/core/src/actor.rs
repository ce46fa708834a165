//! What the trainer needs from a policy, and the Q-maximizing policy loss.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numcore::{Graph, Mlp, MlpVars, Scalar, Tensor, Var};

/// A stochastic policy over `[−1, 1]^d` backed by a single MLP.
pub trait Actor<S: Scalar> {
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn net(&self) -> &Mlp<S>;
    fn net_mut(&mut self) -> &mut Mlp<S>;

    /// One action per row of `states`, before any exploration noise.
    fn act<R: Rng + ?Sized>(&self, states: &Tensor<S>, rng: &mut R) -> Result<Tensor<S>>;

    /// Same as [`Actor::act`] but recorded on `g`, differentiable with
    /// respect to `vars`.
    fn act_on<R: Rng + ?Sized>(&self, g: &mut Graph<S>, vars: &MlpVars, states: Var, rng: &mut R) -> Result<Var>;
}

/// Anything that can score `(state, action)` rows on a tape.
pub trait ActionValue<S: Scalar> {
    /// `[batch, 1]` values; the critic's own parameters are treated as
    /// constants.
    fn value_on(&self, g: &mut Graph<S>, states: Var, actions: Var) -> Result<Var>;
}

#[derive(Clone, Debug)]
pub struct PolicyLoss<S> {
    pub value: S,
    /// One tensor per actor parameter, in [`Mlp::params`] order.
    pub grads: Vec<Tensor<S>>,
}

/// `−mean_s Q(s, a₀)` with `a₀` drawn through the recorded sampler, and its
/// gradient with respect to the actor's parameters.
pub fn policy_loss<S, A, Q, R>(actor: &A, critic: &Q, states: &Tensor<S>, rng: &mut R) -> Result<PolicyLoss<S>>
where
    S: Scalar,
    A: Actor<S>,
    Q: ActionValue<S> + ?Sized,
    R: Rng + ?Sized,
{
    if states.is_empty() || states.rows() == 0 {
        return Err(Error::contract("policy loss on an empty batch"));
    }
    let mut g = Graph::new();
    let vars = actor.net().bind(&mut g);
    let s = g.constant(states.clone());
    let a = actor.act_on(&mut g, &vars, s, rng)?;
    let q = critic.value_on(&mut g, s, a)?;
    let mean_q = g.mean(q);
    let loss = g.neg(mean_q);
    let value = g.value(loss).item()?;
    if !value.is_finite() {
        return Err(Error::numeric("non-finite policy loss"));
    }
    let mut grads = g.backward(loss)?;
    let grads = actor.net().grads_from(&mut grads, &vars);
    Ok(PolicyLoss { value, grads })
}
