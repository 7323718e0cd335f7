use crate::error::{Error, Result};
use crate::gen::{score_from_prediction, Denoiser, GaussianMixture};
use crate::nn::{vjp, Graph, Tensor, Var};
use crate::scalar::Real;

/// A differentiable batch score `x ↦ s(x, t)`, rows evaluated independently.
pub trait ScoreFunction<S: Real> {
    fn scores(&self, x: &Tensor<S>, t: &[S]) -> Result<Tensor<S>>;

    /// Row-wise `(∂s/∂x_i)ᵀ v_i`.
    fn scores_vjp(&self, x: &Tensor<S>, t: &[S], v: &Tensor<S>) -> Result<Tensor<S>>;
}

impl<S: Real> ScoreFunction<S> for GaussianMixture<S> {
    fn scores(&self, x: &Tensor<S>, t: &[S]) -> Result<Tensor<S>> {
        GaussianMixture::scores(self, x, t)
    }

    fn scores_vjp(&self, x: &Tensor<S>, t: &[S], v: &Tensor<S>) -> Result<Tensor<S>> {
        GaussianMixture::scores_vjp(self, x, t, v)
    }
}

/// Score of a trained `x0` predictor, `((1−t)·F(x, t) − x) / t²`.
#[derive(Debug, Clone, Copy)]
pub struct DenoiserScore<'a, S> {
    pub net: &'a Denoiser<S>,
}

impl<S: Real> ScoreFunction<S> for DenoiserScore<'_, S> {
    fn scores(&self, x: &Tensor<S>, t: &[S]) -> Result<Tensor<S>> {
        let mut g = Graph::new();
        let xv = g.constant(x.clone());
        let out = self.trace(&mut g, xv, t)?;
        Ok(g.value(out).clone())
    }

    fn scores_vjp(&self, x: &Tensor<S>, t: &[S], v: &Tensor<S>) -> Result<Tensor<S>> {
        Ok(vjp(|g, xv| self.trace(g, xv, t), x, v)?.1)
    }
}

impl<S: Real> DenoiserScore<'_, S> {
    fn trace(&self, g: &mut Graph<S>, x: Var, t: &[S]) -> Result<Var> {
        let vars = self.net.mlp().bind(g, false);
        let pred = self.net.forward(g, &vars, x, t, None)?.output;
        score_from_prediction(g, pred, x, t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreSource {
    Real,
    Fake,
}

/// Scores of one model at a batch of noisy samples; row `i` belongs to
/// sample `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreBatch<S> {
    scores: Tensor<S>,
    source: ScoreSource,
}

impl<S: Real> ScoreBatch<S> {
    pub fn new(scores: Tensor<S>, source: ScoreSource) -> Result<Self> {
        if scores.rank() != 2 {
            return Err(Error::InvalidShape(format!("score batch must be 2-D, got {:?}", scores.shape())));
        }
        Ok(Self {
            scores: scores.ensure_finite("score batch")?,
            source,
        })
    }

    pub fn evaluate(f: &dyn ScoreFunction<S>, x: &Tensor<S>, t: &[S], source: ScoreSource) -> Result<Self> {
        Self::new(f.scores(x, t)?, source)
    }

    pub fn scores(&self) -> &Tensor<S> {
        &self.scores
    }

    pub fn source(&self) -> ScoreSource {
        self.source
    }
}
