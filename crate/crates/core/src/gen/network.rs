//! Time- and condition-aware `x0` predictors: the generator and the fake
//! score model share this shape.

use rand::Rng;

use crate::error::{Error, Result};
use crate::gen::noise::{check_time, standard_normal, time_embedding, NoiseSchedule, TIME_EMBED_WIDTH};
use crate::nn::{Activation, Graph, Mlp, MlpTrace, MlpVars, Tensor, Var};
use crate::scalar::Real;

/// Perceptron on `[x_t, embed(t), cond]` that predicts `x0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Denoiser<S> {
    mlp: Mlp<S>,
    data_dim: usize,
    cond_dim: usize,
}

impl<S: Real> Denoiser<S> {
    pub fn new<R: Rng + ?Sized>(data_dim: usize, cond_dim: usize, hidden: &[usize], rng: &mut R) -> Result<Self> {
        let mut widths = vec![data_dim + TIME_EMBED_WIDTH + cond_dim];
        widths.extend_from_slice(hidden);
        widths.push(data_dim);
        Self::from_mlp(Mlp::new(&widths, Activation::Tanh, rng)?, data_dim, cond_dim)
    }

    pub fn from_mlp(mlp: Mlp<S>, data_dim: usize, cond_dim: usize) -> Result<Self> {
        if mlp.input_width() != data_dim + TIME_EMBED_WIDTH + cond_dim || mlp.output_width() != data_dim {
            return Err(Error::InvalidShape(format!(
                "network widths {:?} do not fit data dim {data_dim} and condition dim {cond_dim}",
                mlp.widths()
            )));
        }
        Ok(Self { mlp, data_dim, cond_dim })
    }

    pub fn mlp(&self) -> &Mlp<S> {
        &self.mlp
    }

    pub fn mlp_mut(&mut self) -> &mut Mlp<S> {
        &mut self.mlp
    }

    pub fn data_dim(&self) -> usize {
        self.data_dim
    }

    pub fn cond_dim(&self) -> usize {
        self.cond_dim
    }

    /// Copy accepting `extra` further condition columns with zero weights,
    /// so its outputs are unchanged whatever the new inputs are.
    pub fn widen_condition(&self, extra: usize) -> Self {
        Self {
            mlp: self.mlp.widen_input(extra),
            data_dim: self.data_dim,
            cond_dim: self.cond_dim + extra,
        }
    }

    /// Network input for a batch; `cond` is one row shared by the batch or
    /// one row per sample.
    fn inputs(&self, graph: &mut Graph<S>, x: Var, t: &[S], cond: Option<&Tensor<S>>) -> Result<Var> {
        let b = graph.value(x).rows();
        if graph.value(x).shape() != [b, self.data_dim] {
            return Err(Error::shape("denoiser input", graph.value(x).shape(), &[b, self.data_dim]));
        }
        if t.len() != b {
            return Err(Error::shape("denoiser times", &[t.len()], &[b]));
        }
        for &ti in t {
            check_time(ti)?;
        }
        let emb = graph.constant(time_embedding(t));
        let mut parts = vec![x, emb];
        match (cond, self.cond_dim) {
            (None, 0) => {}
            (Some(c), k) if k > 0 && c.rank() == 2 && c.cols() == k && (c.rows() == 1 || c.rows() == b) => {
                parts.push(graph.constant(c.broadcast_to(&[b, k])?));
            }
            (c, k) => {
                return Err(Error::shape(
                    "denoiser condition",
                    c.map(|c| c.shape().to_vec()).unwrap_or_default().as_slice(),
                    &[b, k],
                ))
            }
        }
        graph.concat(&parts, 1)
    }

    pub fn forward(
        &self,
        graph: &mut Graph<S>,
        vars: &MlpVars,
        x: Var,
        t: &[S],
        cond: Option<&Tensor<S>>,
    ) -> Result<MlpTrace> {
        let input = self.inputs(graph, x, t, cond)?;
        self.mlp.forward(graph, vars, input)
    }

    pub fn predict(&self, x: &Tensor<S>, t: &[S], cond: Option<&Tensor<S>>) -> Result<Tensor<S>> {
        let mut g = Graph::new();
        let vars = self.mlp.bind(&mut g, false);
        let xv = g.constant(x.clone());
        let out = self.forward(&mut g, &vars, xv, t, cond)?.output;
        Ok(g.value(out).clone())
    }
}

/// `((1−t)·pred − x) / t²` traced row-wise.
pub fn score_from_prediction<S: Real>(graph: &mut Graph<S>, pred: Var, x: Var, t: &[S]) -> Result<Var> {
    let b = graph.value(x).rows();
    if t.len() != b || graph.value(pred).shape() != graph.value(x).shape() {
        return Err(Error::shape("score_from_prediction", graph.value(pred).shape(), graph.value(x).shape()));
    }
    if let Some(&bad) = t.iter().find(|&&ti| !(ti > S::zero() && ti <= S::one())) {
        return Err(Error::InvalidArgument(format!("score conversion needs t in (0, 1], got {bad}")));
    }
    let a: Vec<S> = t.iter().map(|&ti| (S::one() - ti) / (ti * ti)).collect();
    let c: Vec<S> = t.iter().map(|&ti| S::one() / (ti * ti)).collect();
    let a = graph.constant(Tensor::matrix(b, 1, a)?);
    let c = graph.constant(Tensor::matrix(b, 1, c)?);
    let p = graph.mul_broadcast(pred, a)?;
    let q = graph.mul_broadcast(x, c)?;
    graph.sub(p, q)
}

/// Mean over batch and dimensions of `(F(x_t, t) − x0)²`.
pub fn denoising_loss<S: Real>(graph: &mut Graph<S>, prediction: Var, x0: &Tensor<S>) -> Result<Var> {
    if graph.value(prediction).shape() != x0.shape() {
        return Err(Error::shape("denoising_loss", graph.value(prediction).shape(), x0.shape()));
    }
    let target = graph.constant(x0.clone());
    let diff = graph.sub(prediction, target)?;
    let sq = graph.square(diff)?;
    graph.mean(sq)
}

/// One denoising step of a rollout.
#[derive(Debug, Clone)]
pub struct RolloutStep {
    pub t: f64,
    pub x_t: Var,
    pub x0: Var,
}

#[derive(Debug, Clone)]
pub struct Rollout {
    pub x0: Var,
    pub steps: Vec<RolloutStep>,
}

/// Few-step sampling: predict `x0` at each scheduled time, re-noise the
/// prediction to the next time with fresh noise, and return the final
/// prediction. Gradients flow through every step.
pub fn generator_rollout<S: Real, R: Rng + ?Sized>(
    graph: &mut Graph<S>,
    generator: &Denoiser<S>,
    vars: &MlpVars,
    z: Var,
    cond: Option<&Tensor<S>>,
    schedule: &NoiseSchedule,
    rng: &mut R,
) -> Result<Rollout> {
    let (b, d) = (graph.value(z).rows(), graph.value(z).cols());
    let mut x_t = z;
    let mut steps = Vec::with_capacity(schedule.len());
    for (k, &t) in schedule.steps().iter().enumerate() {
        let x0 = generator.forward(graph, vars, x_t, &vec![S::lit(t); b], cond)?.output;
        steps.push(RolloutStep { t, x_t, x0 });
        if let Some(&next) = schedule.steps().get(k + 1) {
            let noise = standard_normal::<S, _>(b, d, rng).scale(S::lit(next));
            let kept = graph.scale(x0, S::lit(1.0 - next))?;
            let noise = graph.constant(noise);
            x_t = graph.add(kept, noise)?;
        }
    }
    let x0 = steps.last().expect("schedules are non-empty").x0;
    Ok(Rollout { x0, steps })
}

/// Untraced rollout; the returned steps hold `(t, x_t, x0)`.
pub fn rollout_tensors<S: Real, R: Rng + ?Sized>(
    generator: &Denoiser<S>,
    z: &Tensor<S>,
    cond: Option<&Tensor<S>>,
    schedule: &NoiseSchedule,
    rng: &mut R,
) -> Result<Vec<(f64, Tensor<S>, Tensor<S>)>> {
    let mut g = Graph::new();
    let vars = generator.mlp().bind(&mut g, false);
    let zv = g.constant(z.clone());
    let r = generator_rollout(&mut g, generator, &vars, zv, cond, schedule, rng)?;
    Ok(r
        .steps
        .iter()
        .map(|s| (s.t, g.value(s.x_t).clone(), g.value(s.x0).clone()))
        .collect())
}
