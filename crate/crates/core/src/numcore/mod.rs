//! Dense numerics: tensors, a reverse-mode tape, small MLPs and Adam.

pub mod activation;
pub mod adam;
pub mod checkpoint;
pub mod graph;
pub mod nn;
pub mod scalar;
pub mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::Checkpoint;
pub use graph::{ClampGrad, Gradients, Graph, Var};
pub use nn::{sinusoidal_embed, Activation, Linear, Mlp, MlpVars};
pub use scalar::Scalar;
pub use tensor::Tensor;
