//! Linear-interpolation forward process `x_t = (1−t)·x0 + t·z`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::scalar::Real;

pub(crate) fn check_time<S: Real>(t: S) -> Result<()> {
    if !(t >= S::zero() && t <= S::one()) {
        return Err(Error::InvalidArgument(format!("time {t} outside [0, 1]")));
    }
    Ok(())
}

/// Strictly decreasing generator times starting at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct NoiseSchedule {
    steps: Vec<f64>,
}

impl NoiseSchedule {
    pub fn new(steps: Vec<f64>) -> Result<Self> {
        if steps.first() != Some(&1.0) {
            return Err(Error::Config(format!("schedule must start at 1.0, got {steps:?}")));
        }
        if steps.iter().any(|&t| !(t > 0.0 && t <= 1.0)) || steps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config(format!(
                "schedule must be strictly decreasing within (0, 1], got {steps:?}"
            )));
        }
        Ok(Self { steps })
    }

    /// `k` evenly spaced steps `1, 1 − 1/k, …, 1/k`.
    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("schedule needs at least one step".into()));
        }
        Self::new((0..k).map(|i| 1.0 - i as f64 / k as f64).collect())
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self {
            steps: vec![1.0, 0.75, 0.5, 0.25],
        }
    }
}

impl TryFrom<Vec<f64>> for NoiseSchedule {
    type Error = Error;

    fn try_from(steps: Vec<f64>) -> Result<Self> {
        Self::new(steps)
    }
}

impl From<NoiseSchedule> for Vec<f64> {
    fn from(s: NoiseSchedule) -> Self {
        s.steps
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisySample<S> {
    pub x0: Vec<S>,
    pub z: Vec<S>,
    pub t: S,
    pub x_t: Vec<S>,
}

pub fn add_noise<S: Real>(x0: &[S], t: S, z: &[S]) -> Result<NoisySample<S>> {
    check_time(t)?;
    if x0.len() != z.len() {
        return Err(Error::shape("add_noise", &[x0.len()], &[z.len()]));
    }
    let a = S::one() - t;
    Ok(NoisySample {
        x0: x0.to_vec(),
        z: z.to_vec(),
        t,
        x_t: x0.iter().zip(z).map(|(&x, &e)| a * x + t * e).collect(),
    })
}

/// Batched forward process with one time per row.
pub fn add_noise_batch<S: Real>(x0: &Tensor<S>, t: &[S], z: &Tensor<S>) -> Result<Tensor<S>> {
    if x0.rank() != 2 || x0.shape() != z.shape() {
        return Err(Error::shape("add_noise_batch", x0.shape(), z.shape()));
    }
    if t.len() != x0.rows() {
        return Err(Error::shape("add_noise_batch times", &[t.len()], &[x0.rows()]));
    }
    let mut out = Vec::with_capacity(x0.numel());
    for (i, &ti) in t.iter().enumerate() {
        out.extend(add_noise(x0.row(i), ti, z.row(i))?.x_t);
    }
    Tensor::matrix(x0.rows(), x0.cols(), out)
}

pub fn standard_normal<S: Real, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Tensor<S> {
    let data = (0..rows * cols)
        .map(|_| S::lit(rng.sample::<f64, _>(StandardNormal)))
        .collect();
    Tensor::new(vec![rows, cols], data).expect("sized")
}

/// Score implied by an `x0` prediction: `((1−t)·x̂0 − x_t) / t²`.
pub fn denoiser_to_score<S: Real>(x0_pred: &[S], x_t: &[S], t: S) -> Result<Vec<S>> {
    check_time(t)?;
    if t == S::zero() {
        return Err(Error::InvalidArgument("cannot convert a prediction to a score at t = 0".into()));
    }
    if x0_pred.len() != x_t.len() {
        return Err(Error::shape("denoiser_to_score", &[x0_pred.len()], &[x_t.len()]));
    }
    let a = S::one() - t;
    let inv = S::one() / (t * t);
    Ok(x0_pred.iter().zip(x_t).map(|(&p, &x)| (a * p - x) * inv).collect())
}

/// Sinusoidal features `[sin(2^k π t), cos(2^k π t)]` for `k < width/2`.
pub const TIME_EMBED_WIDTH: usize = 8;

pub fn time_embedding<S: Real>(t: &[S]) -> Tensor<S> {
    let mut out = Vec::with_capacity(t.len() * TIME_EMBED_WIDTH);
    for &ti in t {
        for k in 0..TIME_EMBED_WIDTH / 2 {
            let w = S::PI() * S::lit((1u32 << k) as f64) * ti;
            out.push(w.sin());
            out.push(w.cos());
        }
    }
    Tensor::new(vec![t.len(), TIME_EMBED_WIDTH], out).expect("sized")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::GaussianMixture;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn noise_endpoints_and_midpoint() {
        let x0 = [2.0, 0.0];
        let z = [0.0, 2.0];
        assert_eq!(add_noise(&x0, 0.0, &z).unwrap().x_t, x0);
        assert_eq!(add_noise(&x0, 1.0, &z).unwrap().x_t, z);
        assert_eq!(add_noise(&x0, 0.5, &z).unwrap().x_t, vec![1.0, 1.0]);
        assert!(add_noise(&x0, 1.1, &z).is_err());
        assert!(add_noise(&x0, -0.1, &z).is_err());
    }

    #[test]
    fn schedules_validate() {
        assert_eq!(NoiseSchedule::default(), NoiseSchedule::uniform(4).unwrap());
        assert_eq!(NoiseSchedule::uniform(1).unwrap().steps(), &[1.0]);
        assert!(NoiseSchedule::new(vec![0.9, 0.5]).is_err());
        assert!(NoiseSchedule::new(vec![1.0, 0.5, 0.5]).is_err());
        assert!(NoiseSchedule::new(vec![1.0, 0.0]).is_err());
        let s: NoiseSchedule = serde_json::from_str("[1.0, 0.5]").unwrap();
        assert_eq!(serde_json::to_string(&s).unwrap(), "[1.0,0.5]");
        assert!(serde_json::from_str::<NoiseSchedule>("[0.5]").is_err());
    }

    #[test]
    fn denoiser_score_examples() {
        assert_eq!(denoiser_to_score(&[0.0, 0.0], &[0.5, -2.0], 1.0).unwrap(), vec![-0.5, 2.0]);
        let pred = [1.0, -3.0];
        let t = 0.4;
        let x: Vec<f64> = pred.iter().map(|p| 0.6 * p).collect();
        assert!(denoiser_to_score(&pred, &x, t).unwrap().iter().all(|v| v.abs() < 1e-15));
        assert!(denoiser_to_score(&pred, &x, 0.0).is_err());
    }

    /// Posterior mean of `x0 ~ N(μ, σ²I)` given `x_t`, derived independently
    /// from the joint Gaussian of `(x0, x_t)`.
    fn gaussian_posterior_mean(mu: &[f64], var: f64, x: &[f64], t: f64) -> Vec<f64> {
        let a = 1.0 - t;
        let v = a * a * var + t * t;
        mu.iter().zip(x).map(|(&m, &xi)| m + a * var / v * (xi - a * m)).collect()
    }

    #[test]
    fn bayes_denoiser_reproduces_the_analytic_score() {
        let mu = [0.7, -1.3];
        let var = 0.3;
        let gm = GaussianMixture::gaussian(mu.to_vec(), var).unwrap();
        let x = [0.2, 0.9];
        for t in [0.25, 0.5, 0.75, 1.0] {
            let pred = gaussian_posterior_mean(&mu, var, &x, t);
            let s = denoiser_to_score(&pred, &x, t).unwrap();
            let exact = gm.score_noised(&x, t).unwrap();
            for (a, b) in s.iter().zip(&exact) {
                assert!((a - b).abs() < 1e-6, "t={t}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn noised_mixture_moments() {
        let gm = GaussianMixture::new(
            vec![0.25, 0.75],
            Tensor::from_rows(&[[-2.0, 1.0], [1.0, 0.5]]).unwrap(),
            vec![0.3, 0.1],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 40_000;
        let t = 0.6;
        let x0 = gm.sample(n, &mut rng).unwrap();
        let z = standard_normal::<f64, _>(n, 2, &mut rng);
        let xt = add_noise_batch(&x0, &vec![t; n], &z).unwrap();
        for c in 0..2 {
            let mut mean = 0.0;
            let mut second = 0.0;
            for k in 0..2 {
                let (m, v) = gm.noised_component(k, t);
                mean += gm.weights()[k] * m[c];
                second += gm.weights()[k] * (v + m[c] * m[c]);
            }
            let var = second - mean * mean;
            let emp_mean = (0..n).map(|i| xt.at(i, c)).sum::<f64>() / n as f64;
            let emp_var = (0..n).map(|i| (xt.at(i, c) - emp_mean).powi(2)).sum::<f64>() / n as f64;
            let se = 5.0 / (n as f64).sqrt();
            assert!((emp_mean - mean).abs() < se * var.sqrt(), "{emp_mean} vs {mean}");
            assert!((emp_var - var).abs() < se * var * 2f64.sqrt(), "{emp_var} vs {var}");
        }
    }

    #[test]
    fn embedding_is_bounded_and_distinguishes_times() {
        let e = time_embedding(&[0.25, 0.5]);
        assert_eq!(e.shape(), &[2, TIME_EMBED_WIDTH]);
        assert!(e.data().iter().all(|v: &f64| v.abs() <= 1.0));
        assert_ne!(e.row(0), e.row(1));
    }
}
