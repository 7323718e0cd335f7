//! Finite-difference suites behind `otdlab gradcheck`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::gen::{standard_normal, Denoiser, GaussianMixture};
use crate::nn::{Graph, Tensor};
use crate::objectives::{dmd_loss, otd_gradient, DenoiserScore, ScoreFunction};
use crate::ot::{eot_value, grad_wrt_samples, pairwise_half_sq_euclidean, sinkhorn_log, Marginals, SinkhornConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub instances: usize,
    /// Worst `‖analytic − fd‖ / max(‖fd‖, ‖analytic‖)` over the instances.
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub seed: u64,
    pub suites: Vec<SuiteResult>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(|s| s.passed)
    }
}

fn rel(an: &Tensor<f64>, fd: &Tensor<f64>) -> f64 {
    let diff = an.sub(fd).map(|d| d.norm()).unwrap_or(f64::INFINITY);
    diff / an.norm().max(fd.norm()).max(1e-12)
}

/// Central differences of `f` at `x`, one coordinate at a time.
pub fn central_differences(x: &Tensor<f64>, h: f64, mut f: impl FnMut(&Tensor<f64>) -> Result<f64>) -> Result<Tensor<f64>> {
    let mut out = Tensor::zeros(x.shape());
    for k in 0..x.numel() {
        let (mut p, mut m) = (x.clone(), x.clone());
        p.data_mut()[k] += h;
        m.data_mut()[k] -= h;
        out.data_mut()[k] = (f(&p)? - f(&m)?) / (2.0 * h);
    }
    Ok(out)
}

fn suite(name: &str, tolerance: f64, errors: Vec<f64>) -> SuiteResult {
    let max_rel_error = errors.iter().copied().fold(0.0, f64::max);
    SuiteResult {
        name: name.into(),
        instances: errors.len(),
        max_rel_error,
        tolerance,
        passed: max_rel_error < tolerance,
    }
}

fn uniform(rng: &mut ChaCha8Rng, r: usize, c: usize, lo: f64, hi: f64) -> Tensor<f64> {
    Tensor::matrix(r, c, (0..r * c).map(|_| rng.random_range(lo..hi)).collect()).expect("sized")
}

fn primitives(rng: &mut ChaCha8Rng, n: usize) -> Result<SuiteResult> {
    let mut errors = Vec::with_capacity(n);
    for _ in 0..n {
        let w = uniform(rng, 3, 4, -1.0, 1.0);
        let x = uniform(rng, 2, 3, -1.0, 1.0);
        let f = |x: &Tensor<f64>| -> Result<f64> {
            let mut g = Graph::new();
            let (xv, wv) = (g.constant(x.clone()), g.constant(w.clone()));
            let y = g.matmul(xv, wv)?;
            let y = g.tanh(y)?;
            let y = g.sum(y)?;
            g.value(y).item()
        };
        let mut g = Graph::new();
        let (xv, wv) = (g.leaf(x.clone()), g.constant(w.clone()));
        let y = g.matmul(xv, wv)?;
        let y = g.tanh(y)?;
        let y = g.sum(y)?;
        let an = g.backward(y)?.get(&g, xv);
        errors.push(rel(&an, &central_differences(&x, 1e-5, f)?));
    }
    Ok(suite("graph_primitives", 1e-6, errors))
}

fn envelope(rng: &mut ChaCha8Rng, n: usize) -> Result<SuiteResult> {
    let cfg = SinkhornConfig {
        epsilon: 0.5,
        tol: 1e-12,
        max_iter: 100_000,
    };
    let mut errors = Vec::with_capacity(n);
    for _ in 0..n {
        let (i, j) = (rng.random_range(2..7), rng.random_range(2..7));
        let a = uniform(rng, i, 2, -1.0, 1.0);
        let b = uniform(rng, j, 2, -1.0, 1.0);
        let m = Marginals::uniform(i, j);
        let value = |a: &Tensor<f64>| -> Result<f64> {
            let d = pairwise_half_sq_euclidean(a, &b)?;
            let sol = sinkhorn_log(&d, &m, &cfg)?;
            eot_value(&d, &sol.plan, cfg.epsilon)
        };
        let d = pairwise_half_sq_euclidean(&a, &b)?;
        let sol = sinkhorn_log(&d, &m, &cfg)?;
        let an = grad_wrt_samples(&a, &b, &sol.plan)?.wrt_a;
        errors.push(rel(&an, &central_differences(&a, 1e-4, value)?));
    }
    Ok(suite("envelope_gradient", 1e-3, errors))
}

fn otd_pipeline(rng: &mut ChaCha8Rng, n: usize) -> Result<SuiteResult> {
    let real = GaussianMixture::<f64>::new(
        vec![0.5, 0.5],
        Tensor::from_rows(&[[-1.5, 0.0], [1.5, 0.0]])?,
        vec![0.3, 0.3],
    )?;
    let cfg = SinkhornConfig {
        epsilon: 10.0,
        tol: 1e-12,
        max_iter: 50_000,
    };
    let mut errors = Vec::with_capacity(n);
    for _ in 0..n {
        let net = Denoiser::<f64>::new(2, 0, &[16, 16], rng)?;
        let fake = DenoiserScore { net: &net };
        let b = 4;
        let x = standard_normal(b, 2, rng);
        let t: Vec<f64> = (0..b).map(|_| rng.random_range(0.2..1.0)).collect();
        let value = |x: &Tensor<f64>| -> Result<f64> {
            let a = fake.scores(x, &t)?;
            let s = real.scores(x, &t)?;
            let d = pairwise_half_sq_euclidean(&a, &s)?;
            let sol = sinkhorn_log(&d, &Marginals::uniform(b, b), &cfg)?;
            eot_value(&d, &sol.plan, cfg.epsilon)
        };
        let an = otd_gradient(&x, &t, &fake, &real, &cfg)?.grad;
        errors.push(rel(&an, &central_differences(&x, 1e-4, value)?));
    }
    Ok(suite("otd_pipeline", 1e-2, errors))
}

fn stop_gradient(rng: &mut ChaCha8Rng, n: usize) -> Result<SuiteResult> {
    let mut errors = Vec::with_capacity(n);
    for _ in 0..n {
        let x0 = uniform(rng, 4, 3, -2.0, 2.0);
        let g = uniform(rng, 4, 3, -2.0, 2.0);
        let mut graph = Graph::new();
        let xv = graph.leaf(x0);
        let loss = dmd_loss(&mut graph, xv, &g)?;
        let an = graph.backward(loss)?.get(&graph, xv);
        errors.push(rel(&an, &g.scale(2.0 / g.numel() as f64)));
    }
    Ok(suite("stop_gradient", 1e-12, errors))
}

/// Runs every suite with `instances` random cases each.
pub fn run_gradcheck(seed: u64, instances: usize) -> Result<GradcheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let suites = vec![
        primitives(&mut rng, instances)?,
        envelope(&mut rng, instances)?,
        otd_pipeline(&mut rng, instances)?,
        stop_gradient(&mut rng, instances)?,
    ];
    Ok(GradcheckReport { seed, suites })
}
