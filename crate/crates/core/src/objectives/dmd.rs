use crate::error::{Error, Result};
use crate::nn::{Graph, Tensor, Var};
use crate::objectives::scores::{ScoreBatch, ScoreSource};
use crate::scalar::Real;

/// Reverse-KL gradient at shared noisy samples: `s_fake − s_real` per row.
pub fn kl_gradient<S: Real>(real: &ScoreBatch<S>, fake: &ScoreBatch<S>) -> Result<Tensor<S>> {
    if real.source() != ScoreSource::Real || fake.source() != ScoreSource::Fake {
        return Err(Error::InvalidArgument("kl_gradient expects (real, fake) score batches".into()));
    }
    fake.scores().sub(real.scores())
}

/// `mean((x0 − sg(x0 − g))²)`. The target is built from `g`'s value, so no
/// gradient can reach whatever produced `g`. The value is `mean(g²)` and the
/// gradient with respect to `x0` is `2g/N` with `N` the element count.
pub fn stop_gradient_loss<S: Real>(graph: &mut Graph<S>, x0: Var, g: &Tensor<S>) -> Result<Var> {
    let current = graph.value(x0);
    if current.shape() != g.shape() {
        return Err(Error::shape("stop_gradient_loss", current.shape(), g.shape()));
    }
    let target = current.sub(g)?;
    let target = graph.constant(target);
    let diff = graph.sub(x0, target)?;
    let sq = graph.square(diff)?;
    graph.mean(sq)
}

pub fn dmd_loss<S: Real>(graph: &mut Graph<S>, x0: Var, kl_grad: &Tensor<S>) -> Result<Var> {
    stop_gradient_loss(graph, x0, kl_grad)
}

pub fn otd_loss<S: Real>(graph: &mut Graph<S>, x0: Var, ot_grad: &Tensor<S>) -> Result<Var> {
    stop_gradient_loss(graph, x0, ot_grad)
}
