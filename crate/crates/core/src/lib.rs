//! Desk-scale laboratory for optimal-transport regularised distribution
//! matching distillation.
//!
//! The numerical core (tensors, the differentiation tape, perceptrons, Adam,
//! and the optimal-transport solvers) is generic over [`Real`], implemented
//! for `f32` and `f64`. Training and the experiment runner work in `f64`
//! through the aliases below.

pub mod error;
pub mod experiment;
pub mod gen;
pub mod nn;
pub mod objectives;
pub mod ot;
pub mod scalar;
pub mod trainer;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Tensor64 = nn::Tensor<f64>;
pub type Tensor32 = nn::Tensor<f32>;
pub type Graph64 = nn::Graph<f64>;
pub type Mlp64 = nn::Mlp<f64>;
pub type AdamState64 = nn::AdamState<f64>;
pub type CostMatrix64 = ot::CostMatrix<f64>;
pub type Marginals64 = ot::Marginals<f64>;
pub type EotSolution64 = ot::EotSolution<f64>;
pub type Denoiser64 = gen::Denoiser<f64>;
pub type GaussianMixture64 = gen::GaussianMixture<f64>;
pub type Discriminator64 = objectives::Discriminator<f64>;
