//! Log-domain Sinkhorn iterations.
//!
//! With `log K = −D/ε` and dual potentials `f`, `g` (in units of ε), each
//! sweep sets
//!
//! ```text
//! f_i = log u_i  − log Σ_j exp(log K_ij + g_j)
//! g_j = log μ_j − log Σ_i exp(log K_ij + f_i)
//! ```
//!
//! and stops once `‖Δf‖₁ + ‖Δg‖₁ < tol`. The plan is recovered as
//! `T_ij = exp(f_i + log K_ij + g_j)`.

use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::ot::cost::{CostMatrix, Marginals};
use crate::scalar::{log_sum_exp, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornConfig {
    pub epsilon: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            tol: 1e-9,
            max_iter: 5000,
        }
    }
}

impl SinkhornConfig {
    pub fn with_epsilon(epsilon: f64) -> Self {
        Self {
            epsilon,
            ..Self::default()
        }
    }
}

/// Output of one solve. Non-convergence is reported through `converged`,
/// never as an error.
#[derive(Debug, Clone, PartialEq)]
pub struct EotSolution<S> {
    pub plan: Tensor<S>,
    pub f: Vec<S>,
    pub g: Vec<S>,
    pub value: S,
    pub iterations: usize,
    pub converged: bool,
    pub epsilon: S,
}

impl<S: Real> EotSolution<S> {
    /// `‖T1 − u‖₁ + ‖Tᵀ1 − μ‖₁`.
    pub fn marginal_error(&self, m: &Marginals<S>) -> S {
        let (rows, cols) = (self.plan.rows(), self.plan.cols());
        let mut err = S::zero();
        for i in 0..rows {
            let s: S = self.plan.row(i).iter().copied().sum();
            err += (s - m.u()[i]).abs();
        }
        for j in 0..cols {
            let s: S = (0..rows).map(|i| self.plan.at(i, j)).sum();
            err += (s - m.mu()[j]).abs();
        }
        err
    }

    /// Transport term `⟨D, T⟩` without the entropy.
    pub fn transport_cost(&self, d: &CostMatrix<S>) -> S {
        self.plan.dot(d.values()).expect("plan and cost share a shape")
    }
}

pub fn sinkhorn_log<S: Real>(d: &CostMatrix<S>, m: &Marginals<S>, cfg: &SinkhornConfig) -> Result<EotSolution<S>> {
    if !(cfg.epsilon > 0.0) || !cfg.epsilon.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive, got {}",
            cfg.epsilon
        )));
    }
    if !(cfg.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {}", cfg.tol)));
    }
    let (rows, cols) = (d.rows(), d.cols());
    if m.u().len() != rows || m.mu().len() != cols {
        return Err(Error::shape(
            "sinkhorn marginals",
            &[rows, cols],
            &[m.u().len(), m.mu().len()],
        ));
    }

    let eps = S::lit(cfg.epsilon);
    let tol = S::lit(cfg.tol);
    let log_k: Vec<S> = d.values().data().iter().map(|&c| -c / eps).collect();
    let log_k_t: Vec<S> = {
        let mut t = vec![S::zero(); rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                t[j * rows + i] = log_k[i * cols + j];
            }
        }
        t
    };
    let log_u: Vec<S> = m.u().iter().map(|w| w.ln()).collect();
    let log_mu: Vec<S> = m.mu().iter().map(|w| w.ln()).collect();

    let mut f = vec![S::zero(); rows];
    let mut g = vec![S::zero(); cols];
    let mut iterations = 0;
    let mut converged = false;
    let mut scratch = vec![S::zero(); rows.max(cols)];

    for _ in 0..cfg.max_iter {
        iterations += 1;
        let mut delta = S::zero();
        for i in 0..rows {
            let row = &log_k[i * cols..(i + 1) * cols];
            for (s, (&k, &gj)) in scratch.iter_mut().zip(row.iter().zip(&g)) {
                *s = k + gj;
            }
            let new = log_u[i] - log_sum_exp(scratch[..cols].iter().copied());
            delta += (new - f[i]).abs();
            f[i] = new;
        }
        for j in 0..cols {
            let col = &log_k_t[j * rows..(j + 1) * rows];
            for (s, (&k, &fi)) in scratch.iter_mut().zip(col.iter().zip(&f)) {
                *s = k + fi;
            }
            let new = log_mu[j] - log_sum_exp(scratch[..rows].iter().copied());
            delta += (new - g[j]).abs();
            g[j] = new;
        }
        if !delta.is_finite() {
            return Err(Error::NonFinite("sinkhorn dual update".into()));
        }
        if delta < tol {
            converged = true;
            break;
        }
    }

    let mut plan = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            plan.push((f[i] + log_k[i * cols + j] + g[j]).exp());
        }
    }
    let plan = Tensor::matrix(rows, cols, plan)?;
    let value = eot_value(d, &plan, eps)?;
    Ok(EotSolution {
        plan,
        f,
        g,
        value,
        iterations,
        converged,
        epsilon: eps,
    })
}

/// `⟨D, T⟩ + ε Σ T_ij log T_ij` with `0 · log 0 = 0`.
pub fn eot_value<S: Real>(d: &CostMatrix<S>, plan: &Tensor<S>, epsilon: S) -> Result<S> {
    if plan.shape() != d.values().shape() {
        return Err(Error::shape("eot_value", plan.shape(), d.values().shape()));
    }
    if let Some(bad) = plan.data().iter().find(|&&t| t < S::zero()) {
        return Err(Error::InvalidArgument(format!("negative plan entry {bad}")));
    }
    let transport = plan.dot(d.values())?;
    if epsilon == S::zero() {
        return Ok(transport);
    }
    let entropy = plan
        .data()
        .iter()
        .filter(|&&t| t > S::zero())
        .fold(S::zero(), |acc, &t| acc + t * t.ln());
    Ok(transport + epsilon * entropy)
}
