//! Multilayer perceptrons and the sinusoidal timestep embedding.

use rand::Rng;

use crate::error::{Error, Result};

use super::activation;
use super::graph::{Graph, Var};
use super::scalar::Scalar;
use super::tensor::{gemm_acc, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Gelu,
    Mish,
}

impl Activation {
    #[inline]
    pub fn apply<S: Scalar>(self, x: S) -> S {
        match self {
            Activation::Gelu => activation::gelu(x),
            Activation::Mish => activation::mish(x),
        }
    }

    fn on_graph<S: Scalar>(self, g: &mut Graph<S>, x: Var) -> Var {
        match self {
            Activation::Gelu => g.gelu(x),
            Activation::Mish => g.mish(x),
        }
    }
}

/// One affine layer: `y = x·W + b` with `W: [in, out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear<S> {
    pub weight: Tensor<S>,
    pub bias: Tensor<S>,
}

impl<S: Scalar> Linear<S> {
    /// Uniform `±1/√fan_in` initialization for weights and biases.
    pub fn init<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let mut draw = || S::lit(rng.random_range(-bound..=bound));
        let weight = Tensor::from_fn(fan_in, fan_out, |_, _| draw());
        let bias = Tensor::from_fn(1, fan_out, |_, _| draw()).reshape(vec![fan_out]).expect("len");
        Self { weight, bias }
    }

    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[fan_in, fan_out]),
            bias: Tensor::zeros(&[fan_out]),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.cols()
    }
}

/// Feed-forward network. The activation sits between layers; the last
/// layer is linear.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<S> {
    layers: Vec<Linear<S>>,
    activation: Activation,
}

/// The graph handles of an [`Mlp`]'s parameters, `(weight, bias)` per layer.
#[derive(Clone, Debug)]
pub struct MlpVars {
    layers: Vec<(Var, Var)>,
}

impl MlpVars {
    /// Weight and bias handles in layer order, matching [`Mlp::params`].
    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.layers.iter().flat_map(|&(w, b)| [w, b])
    }
}

impl<S: Scalar> Mlp<S> {
    /// `sizes` lists every width from input to output, e.g. `[20, 64, 64, 2]`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], activation: Activation, rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::config(format!("bad layer sizes {sizes:?}")));
        }
        let layers = sizes.windows(2).map(|w| Linear::init(w[0], w[1], rng)).collect();
        Ok(Self { layers, activation })
    }

    pub fn from_layers(layers: Vec<Linear<S>>, activation: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("network without layers"));
        }
        for l in &layers {
            if l.weight.shape().len() != 2 || l.bias.len() != l.fan_out() {
                return Err(Error::dim("layer weight/bias shapes disagree"));
            }
        }
        for w in layers.windows(2) {
            if w[0].fan_out() != w[1].fan_in() {
                return Err(Error::dim(format!(
                    "layer widths do not chain: {} -> {}",
                    w[0].fan_out(),
                    w[1].fan_in()
                )));
            }
        }
        Ok(Self { layers, activation })
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn layers(&self) -> &[Linear<S>] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out()
    }

    /// Widths from input to output.
    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Linear::fan_out))
            .collect()
    }

    /// Weights and biases, layer by layer.
    pub fn params(&self) -> impl Iterator<Item = &Tensor<S>> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias])
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Tensor<S>> {
        self.layers.iter_mut().flat_map(|l| [&mut l.weight, &mut l.bias])
    }

    pub fn param_count(&self) -> usize {
        self.params().map(Tensor::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(Tensor::is_finite)
    }

    fn check_input(&self, x: &Tensor<S>) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(Error::dim(format!(
                "network expects {} inputs, got shape {:?}",
                self.input_dim(),
                x.shape()
            )));
        }
        Ok(())
    }

    /// Tape-free forward pass over a `[batch, in]` matrix.
    pub fn forward(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        self.check_input(x)?;
        let m = x.rows();
        let mut h = x.data().to_vec();
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            let (k, n) = (layer.fan_in(), layer.fan_out());
            let mut out = vec![S::zero(); m * n];
            gemm_acc(&h, layer.weight.data(), &mut out, m, k, n);
            for row in out.chunks_mut(n) {
                for (o, &b) in row.iter_mut().zip(layer.bias.data()) {
                    *o = *o + b;
                }
            }
            if li != last {
                out.iter_mut().for_each(|o| *o = self.activation.apply(*o));
            }
            h = out;
        }
        Tensor::new(vec![m, self.output_dim()], h)
    }

    /// Put the parameters on `g` as trainable leaves.
    pub fn bind(&self, g: &mut Graph<S>) -> MlpVars {
        let layers = self
            .layers
            .iter()
            .map(|l| (g.param(l.weight.clone()), g.param(l.bias.clone())))
            .collect();
        MlpVars { layers }
    }

    /// Put the parameters on `g` as constants (gradients stop here).
    pub fn bind_frozen(&self, g: &mut Graph<S>) -> MlpVars {
        let layers = self
            .layers
            .iter()
            .map(|l| (g.constant(l.weight.clone()), g.constant(l.bias.clone())))
            .collect();
        MlpVars { layers }
    }

    /// Recorded forward pass; values are bit-identical to [`Mlp::forward`].
    pub fn forward_on(&self, g: &mut Graph<S>, vars: &MlpVars, x: Var) -> Result<Var> {
        self.check_input(g.value(x))?;
        let last = vars.layers.len() - 1;
        let mut h = x;
        for (li, &(w, b)) in vars.layers.iter().enumerate() {
            let z = g.matmul(h, w)?;
            h = g.add_row(z, b)?;
            if li != last {
                h = self.activation.on_graph(g, h);
            }
        }
        Ok(h)
    }

    /// Collect this network's gradients out of a finished backward pass,
    /// zero-filled where the loss did not reach a parameter.
    pub fn grads_from(&self, grads: &mut super::graph::Gradients<S>, vars: &MlpVars) -> Vec<Tensor<S>> {
        self.params()
            .zip(vars.vars())
            .map(|(p, v)| grads.take(v).unwrap_or_else(|| Tensor::zeros(p.shape())))
            .collect()
    }
}

/// `[sin(t·ω_k)…, cos(t·ω_k)…]` with `ω_k = 10000^(−2k/dim)`, `k = 0..dim/2`.
pub fn sinusoidal_embed<S: Scalar>(t: usize, dim: usize) -> Result<Vec<S>> {
    if dim == 0 || dim % 2 != 0 {
        return Err(Error::config(format!("embedding width must be even, got {dim}")));
    }
    let half = dim / 2;
    let t = t as f64;
    let freq = |k: usize| 10000f64.powf(-2.0 * k as f64 / dim as f64);
    let sin = (0..half).map(|k| S::lit((t * freq(k)).sin()));
    let cos = (0..half).map(|k| S::lit((t * freq(k)).cos()));
    Ok(sin.chain(cos).collect())
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn zero_net_gives_zero() {
        let net = Mlp::<f64>::from_layers(vec![Linear::zeros(3, 4), Linear::zeros(4, 2)], Activation::Gelu).unwrap();
        let x = Tensor::from_fn(5, 3, |i, j| (i * 3 + j) as f64 - 4.0);
        let y = net.forward(&x).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_layer_passes_through() {
        let mut l = Linear::<f64>::zeros(3, 3);
        for i in 0..3 {
            l.weight.data_mut()[i * 3 + i] = 1.0;
        }
        let net = Mlp::from_layers(vec![l], Activation::Gelu).unwrap();
        let x = Tensor::from_fn(2, 3, |i, j| (i as f64) * 1.5 - j as f64);
        assert_eq!(net.forward(&x).unwrap(), x);
    }

    #[test]
    fn two_layer_net_matches_hand_rolled_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = Mlp::<f64>::new(&[3, 5, 2], Activation::Mish, &mut rng).unwrap();
        let x = Tensor::from_fn(4, 3, |i, j| ((i * 7 + j * 3) % 5) as f64 * 0.4 - 1.0);
        let y = net.forward(&x).unwrap();

        let (l0, l1) = (&net.layers()[0], &net.layers()[1]);
        for i in 0..4 {
            let mut hidden = [0.0; 5];
            for (h, hv) in hidden.iter_mut().enumerate() {
                let mut acc = l0.bias.data()[h];
                for j in 0..3 {
                    acc += x.at(i, j) * l0.weight.at(j, h);
                }
                *hv = acc * (1.0 + acc.exp()).ln().tanh();
            }
            for o in 0..2 {
                let mut acc = l1.bias.data()[o];
                for (h, hv) in hidden.iter().enumerate() {
                    acc += hv * l1.weight.at(h, o);
                }
                assert!((y.at(i, o) - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shape_mismatch_is_dimension_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = Mlp::<f64>::new(&[3, 4, 1], Activation::Gelu, &mut rng).unwrap();
        let x = Tensor::<f64>::zeros(&[2, 5]);
        assert!(matches!(net.forward(&x), Err(Error::Dimension(_))));
    }

    #[test]
    fn non_chaining_layers_rejected() {
        let r = Mlp::<f64>::from_layers(vec![Linear::zeros(3, 4), Linear::zeros(5, 2)], Activation::Gelu);
        assert!(r.is_err());
    }

    #[test]
    fn graph_forward_is_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::<f64>::new(&[4, 8, 8, 3], Activation::Gelu, &mut rng).unwrap();
        let x = Tensor::from_fn(6, 4, |i, j| (i as f64 - j as f64) * 0.3);
        let plain = net.forward(&x).unwrap();
        let mut g = Graph::new();
        let vars = net.bind(&mut g);
        let xv = g.constant(x);
        let y = net.forward_on(&mut g, &vars, xv).unwrap();
        assert_eq!(g.value(y), &plain);
    }

    #[test]
    fn init_respects_fan_in_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = Mlp::<f64>::new(&[16, 9], Activation::Gelu, &mut rng).unwrap();
        assert!(net.params().flat_map(|p| p.data()).all(|v| v.abs() <= 0.25));
    }

    #[test]
    fn embedding_at_zero() {
        let e = sinusoidal_embed::<f64>(0, 16).unwrap();
        assert!(e[..8].iter().all(|&v| v == 0.0));
        assert!(e[8..].iter().all(|&v| v == 1.0));
    }

    #[test]
    fn embedding_small_case() {
        let e = sinusoidal_embed::<f64>(1, 4).unwrap();
        // ω = [1, 10000^(-1/2)] = [1, 0.01]
        let want = [1f64.sin(), 0.01f64.sin(), 1f64.cos(), 0.01f64.cos()];
        for (a, b) in e.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(e, sinusoidal_embed::<f64>(1, 4).unwrap());
    }

    #[test]
    fn odd_embedding_width_rejected() {
        assert!(matches!(sinusoidal_embed::<f64>(3, 7), Err(Error::Config(_))));
    }
}
