//! Bias-corrected Adam.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::mlp::Parameters;
use crate::nn::tensor::Tensor;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment accumulators mirroring a parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<S> {
    pub config: AdamConfig,
    m: Vec<Tensor<S>>,
    v: Vec<Tensor<S>>,
    step: u64,
}

impl<S: Real> AdamState<S> {
    pub fn new<P: Parameters<S> + ?Sized>(params: &P, config: AdamConfig) -> Self {
        let zeros: Vec<Tensor<S>> = params.tensors().iter().map(|t| Tensor::zeros(t.shape())).collect();
        Self {
            config,
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Tensor<S>] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Tensor<S>] {
        &self.v
    }
}

/// Applies one Adam update in place.
///
/// Validation happens before any mutation, so on error neither the
/// parameters nor the state change.
pub fn adam_step<S, P>(params: &mut P, grads: &[Tensor<S>], state: &mut AdamState<S>) -> Result<()>
where
    S: Real,
    P: Parameters<S> + ?Sized,
{
    let mut tensors = params.tensors_mut();
    if tensors.len() != grads.len() || tensors.len() != state.m.len() {
        return Err(Error::InvalidArgument(format!(
            "adam: {} parameters, {} gradients, {} moment slots",
            tensors.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (k, (p, g)) in tensors.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || state.m[k].shape() != p.shape() {
            return Err(Error::shape("adam", p.shape(), g.shape()));
        }
        if !g.is_finite() {
            return Err(Error::NonFinite(format!("adam gradient {k}")));
        }
    }

    let c = state.config;
    let t = state.step + 1;
    let (b1, b2) = (S::lit(c.beta1), S::lit(c.beta2));
    let bc1 = S::lit(1.0 - c.beta1.powi(t as i32));
    let bc2 = S::lit(1.0 - c.beta2.powi(t as i32));
    let (lr, eps) = (S::lit(c.lr), S::lit(c.eps));
    let one = S::one();

    for (k, p) in tensors.iter_mut().enumerate() {
        let g = grads[k].data();
        let m = state.m[k].data_mut();
        for (mi, &gi) in m.iter_mut().zip(g) {
            *mi = b1 * *mi + (one - b1) * gi;
        }
        let v = state.v[k].data_mut();
        for (vi, &gi) in v.iter_mut().zip(g) {
            *vi = b2 * *vi + (one - b2) * gi * gi;
        }
        let (m, v) = (state.m[k].data(), state.v[k].data());
        for ((w, &mi), &vi) in p.data_mut().iter_mut().zip(m).zip(v) {
            let m_hat = mi / bc1;
            let v_hat = vi / bc2;
            *w -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    state.step = t;
    Ok(())
}

/// Global L2 norm over a gradient list.
pub fn global_norm<S: Real>(grads: &[Tensor<S>]) -> S {
    grads
        .iter()
        .flat_map(|g| g.data().iter())
        .fold(S::zero(), |acc, &v| acc + v * v)
        .sqrt()
}

/// Rescales `grads` so their global norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_global_norm<S: Real>(grads: &mut [Tensor<S>], max_norm: S) -> S {
    let norm = global_norm(grads);
    if norm > max_norm && norm > S::zero() {
        let k = max_norm / norm;
        for g in grads.iter_mut() {
            for v in g.data_mut() {
                *v *= k;
            }
        }
    }
    norm
}
