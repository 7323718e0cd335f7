//! Tensors, reverse-mode differentiation, perceptrons and the Adam optimizer.

pub mod adam;
pub mod checkpoint;
pub mod graph;
pub mod mlp;
pub mod tensor;

pub use adam::{adam_step, clip_global_norm, global_norm, AdamConfig, AdamState};
pub use checkpoint::CheckpointDoc;
pub use graph::{vjp, Gradients, Graph, Op, Var};
pub use mlp::{Activation, Linear, Mlp, MlpTrace, MlpVars, Parameters};
pub use tensor::Tensor;
