use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::objectives::scores::ScoreFunction;
use crate::ot::{grad_wrt_samples, pairwise_half_sq_euclidean, sinkhorn_log, Marginals, SinkhornConfig};
use crate::scalar::Real;

/// Per-sample transport gradient plus the state of the solve that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct OtdGradient<S> {
    pub grad: Tensor<S>,
    /// Entropic transport value between the fake and real score clouds.
    pub value: S,
    pub iterations: usize,
    /// `false` marks a stale gradient computed from an unconverged plan.
    pub converged: bool,
}

/// Gradient of the entropic transport value between `a_i = s_fake(x_i)` and
/// `b_i = s_real(x_i)` with respect to each noisy sample `x_i`:
///
/// `∇_i = J_fake(x_i)ᵀ ∇_{a_i}W + J_real(x_i)ᵀ ∇_{b_i}W`,
///
/// with the plan held fixed at the solver's output.
pub fn otd_gradient<S: Real>(
    x_t: &Tensor<S>,
    t: &[S],
    fake: &dyn ScoreFunction<S>,
    real: &dyn ScoreFunction<S>,
    cfg: &SinkhornConfig,
) -> Result<OtdGradient<S>> {
    if x_t.rank() != 2 || x_t.rows() == 0 {
        return Err(Error::InvalidShape(format!("otd_gradient needs a B x D batch, got {:?}", x_t.shape())));
    }
    let a = fake.scores(x_t, t)?.ensure_finite("fake scores")?;
    let b = real.scores(x_t, t)?.ensure_finite("real scores")?;
    let d = pairwise_half_sq_euclidean(&a, &b)?;
    let sol = sinkhorn_log(&d, &Marginals::uniform(a.rows(), b.rows()), cfg)?;
    let up = grad_wrt_samples(&a, &b, &sol.plan)?;
    let grad = fake
        .scores_vjp(x_t, t, &up.wrt_a)?
        .add(&real.scores_vjp(x_t, t, &up.wrt_b)?)?
        .ensure_finite("otd gradient")?;
    Ok(OtdGradient {
        grad,
        value: sol.value,
        iterations: sol.iterations,
        converged: sol.converged,
    })
}
