//! Multilayer perceptrons traced on a [`Graph`].

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::graph::{Gradients, Graph, Var};
use crate::nn::tensor::Tensor;
use crate::scalar::Real;

/// Hidden-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::Checkpoint(format!("unknown activation {other:?}"))),
        }
    }
}

/// Anything that owns an ordered list of trainable tensors.
pub trait Parameters<S: Real> {
    fn tensors(&self) -> Vec<&Tensor<S>>;
    fn tensors_mut(&mut self) -> Vec<&mut Tensor<S>>;

    fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.numel()).sum()
    }
}

/// Dense affine layer `x·W + b` with `W` stored as `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<S> {
    pub weight: Tensor<S>,
    pub bias: Tensor<S>,
}

impl<S: Real> Linear<S> {
    /// Glorot-uniform weights and zero bias.
    pub fn glorot<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite bounds");
        let data = (0..fan_in * fan_out).map(|_| S::lit(dist.sample(rng))).collect();
        Self {
            weight: Tensor::new(vec![fan_in, fan_out], data).expect("sized"),
            bias: Tensor::zeros(&[1, fan_out]),
        }
    }

    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[fan_in, fan_out]),
            bias: Tensor::zeros(&[1, fan_out]),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn fan_out(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn forward_tensor(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        let h = x.matmul(&self.weight)?;
        h.add(&self.bias.broadcast_to(h.shape())?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<S> {
    widths: Vec<usize>,
    activation: Activation,
    layers: Vec<Linear<S>>,
}

/// Graph handles for an [`Mlp`]'s parameters, in `weight, bias` order per layer.
#[derive(Debug, Clone)]
pub struct MlpVars {
    vars: Vec<Var>,
}

impl MlpVars {
    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    /// Gradients for every parameter, aligned with [`Parameters::tensors`].
    pub fn grads<S: Real>(&self, graph: &Graph<S>, grads: &Gradients<S>) -> Vec<Tensor<S>> {
        self.vars.iter().map(|&v| grads.get(graph, v)).collect()
    }
}

/// Output node plus the post-activation node of every hidden layer.
#[derive(Debug, Clone)]
pub struct MlpTrace {
    pub output: Var,
    pub hidden: Vec<Var>,
}

impl<S: Real> Mlp<S> {
    /// Randomly initialised network. `widths` lists input, hidden, and
    /// output extents.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], activation: Activation, rng: &mut R) -> Result<Self> {
        Self::check_widths(widths)?;
        let layers = widths
            .windows(2)
            .map(|w| Linear::glorot(w[0], w[1], rng))
            .collect();
        Ok(Self {
            widths: widths.to_vec(),
            activation,
            layers,
        })
    }

    pub fn from_layers(layers: Vec<Linear<S>>, activation: Activation) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::InvalidShape("an mlp needs at least one layer".into()))?;
        let mut widths = vec![first.fan_in()];
        for (k, l) in layers.iter().enumerate() {
            if l.fan_in() != *widths.last().expect("non-empty") || l.bias.shape() != [1, l.fan_out()] {
                return Err(Error::InvalidShape(format!(
                    "layer {k} has weight {:?} and bias {:?} after width {}",
                    l.weight.shape(),
                    l.bias.shape(),
                    widths.last().expect("non-empty")
                )));
            }
            widths.push(l.fan_out());
        }
        Ok(Self {
            widths,
            activation,
            layers,
        })
    }

    fn check_widths(widths: &[usize]) -> Result<()> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::InvalidShape(format!("bad mlp widths {widths:?}")));
        }
        Ok(())
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn layers(&self) -> &[Linear<S>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Linear<S>] {
        &mut self.layers
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().expect("validated")
    }

    pub fn hidden_layers(&self) -> usize {
        self.layers.len() - 1
    }

    /// Zeroes the final layer so the network outputs exactly zero.
    pub fn zero_output_layer(&mut self) {
        let last = self.layers.last_mut().expect("validated");
        *last = Linear::zeros(last.fan_in(), last.fan_out());
    }

    /// Puts the parameters on `graph`, as trainable leaves or as constants.
    pub fn bind(&self, graph: &mut Graph<S>, trainable: bool) -> MlpVars {
        let mut vars = Vec::with_capacity(2 * self.layers.len());
        for l in &self.layers {
            for t in [&l.weight, &l.bias] {
                vars.push(if trainable {
                    graph.leaf(t.clone())
                } else {
                    graph.constant(t.clone())
                });
            }
        }
        MlpVars { vars }
    }

    /// Traces a batch `x: B × in` through the network.
    pub fn forward(&self, graph: &mut Graph<S>, vars: &MlpVars, x: Var) -> Result<MlpTrace> {
        if graph.value(x).shape().len() != 2 || graph.value(x).cols() != self.input_width() {
            return Err(Error::shape("mlp input", graph.value(x).shape(), &[0, self.input_width()]));
        }
        let mut h = x;
        let mut hidden = Vec::with_capacity(self.hidden_layers());
        for k in 0..self.layers.len() {
            let xw = graph.matmul(h, vars.vars[2 * k])?;
            h = graph.add_broadcast(xw, vars.vars[2 * k + 1])?;
            if k + 1 < self.layers.len() {
                h = match self.activation {
                    Activation::Tanh => graph.tanh(h)?,
                };
                hidden.push(h);
            }
        }
        Ok(MlpTrace { output: h, hidden })
    }

    /// Untraced forward pass.
    pub fn forward_tensor(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        let mut h = x.clone();
        for (k, l) in self.layers.iter().enumerate() {
            h = l.forward_tensor(&h)?;
            if k + 1 < self.layers.len() {
                h = match self.activation {
                    Activation::Tanh => h.map(S::tanh),
                };
            }
        }
        h.ensure_finite("mlp forward")
    }

    /// Returns a copy whose first layer accepts `extra` additional input
    /// columns, appended after the existing ones with zero weights.
    pub fn widen_input(&self, extra: usize) -> Self {
        let mut out = self.clone();
        let first = &self.layers[0];
        let (fan_in, fan_out) = (first.fan_in(), first.fan_out());
        let mut w = first.weight.data().to_vec();
        w.resize((fan_in + extra) * fan_out, S::zero());
        out.layers[0].weight = Tensor::new(vec![fan_in + extra, fan_out], w).expect("sized");
        out.widths[0] = fan_in + extra;
        out
    }
}

impl<S: Real> Parameters<S> for Mlp<S> {
    fn tensors(&self) -> Vec<&Tensor<S>> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor<S>> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }
}
