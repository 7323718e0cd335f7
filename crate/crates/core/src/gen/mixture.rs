//! Isotropic Gaussian mixtures and their closed-form noised scores.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gen::noise::check_time;
use crate::nn::Tensor;
use crate::scalar::{log_sum_exp, Real};

/// `Σ_k π_k N(μ_k, σ_k² I)` in `D` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture<S> {
    weights: Vec<S>,
    means: Tensor<S>,
    variances: Vec<S>,
}

impl<S: Real> GaussianMixture<S> {
    /// `means` is `K × D`. Weights may contain zeros but must sum to one.
    pub fn new(weights: Vec<S>, means: Tensor<S>, variances: Vec<S>) -> Result<Self> {
        if means.rank() != 2 || means.rows() == 0 || means.cols() == 0 {
            return Err(Error::InvalidShape(format!("mixture means must be K x D, got {:?}", means.shape())));
        }
        let k = means.rows();
        if weights.len() != k || variances.len() != k {
            return Err(Error::InvalidArgument(format!(
                "{k} means but {} weights and {} variances",
                weights.len(),
                variances.len()
            )));
        }
        if !means.is_finite() {
            return Err(Error::NonFinite("mixture means".into()));
        }
        if weights.iter().any(|&w| !(w >= S::zero()) || !w.is_finite()) {
            return Err(Error::InvalidArgument("mixture weights must be finite and non-negative".into()));
        }
        let total: S = weights.iter().copied().sum();
        let tol = S::lit(1e-12).max(S::epsilon() * S::from_count(4 * k));
        if (total - S::one()).abs() > tol {
            return Err(Error::InvalidArgument(format!("mixture weights sum to {total}")));
        }
        if variances.iter().any(|&v| !(v > S::zero()) || !v.is_finite()) {
            return Err(Error::InvalidArgument("mixture variances must be positive".into()));
        }
        Ok(Self {
            weights,
            means,
            variances,
        })
    }

    /// Single component `N(mean, variance·I)`.
    pub fn gaussian(mean: Vec<S>, variance: S) -> Result<Self> {
        let d = mean.len();
        Self::new(vec![S::one()], Tensor::matrix(1, d, mean)?, vec![variance])
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.cols()
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    pub fn means(&self) -> &Tensor<S> {
        &self.means
    }

    pub fn mean(&self, k: usize) -> &[S] {
        self.means.row(k)
    }

    pub fn variances(&self) -> &[S] {
        &self.variances
    }

    /// Ancestral samples, `n × D`.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Tensor<S>> {
        if n == 0 {
            return Err(Error::InvalidArgument("sample count must be positive".into()));
        }
        let d = self.dim();
        let mut out = Vec::with_capacity(n * d);
        for _ in 0..n {
            let k = self.pick_component(rng.random::<f64>());
            let sd = self.variances[k].sqrt();
            for &m in self.means.row(k) {
                let e: f64 = rng.sample(StandardNormal);
                out.push(m + sd * S::lit(e));
            }
        }
        Tensor::matrix(n, d, out)
    }

    fn pick_component(&self, u: f64) -> usize {
        let mut acc = 0.0;
        let mut last = 0;
        for (k, &w) in self.weights.iter().enumerate() {
            if w == S::zero() {
                continue;
            }
            acc += w.to_f64_lossy();
            last = k;
            if u < acc {
                return k;
            }
        }
        last
    }

    /// Mean and variance of component `k` after noising to time `t`:
    /// `((1−t)μ_k, (1−t)²σ_k² + t²)`.
    pub fn noised_component(&self, k: usize, t: S) -> (Vec<S>, S) {
        let a = S::one() - t;
        let mean = self.means.row(k).iter().map(|&m| a * m).collect();
        (mean, a * a * self.variances[k] + t * t)
    }

    /// Per-component `(log π_k + log N(x; m_k, v_k I), m_k, v_k)`, skipping
    /// zero-weight components.
    fn log_terms(&self, x: &[S], t: S) -> Vec<(S, Vec<S>, S)> {
        let d = S::from_count(self.dim());
        let two_pi = S::lit(2.0) * S::PI();
        (0..self.components())
            .filter(|&k| self.weights[k] > S::zero())
            .map(|k| {
                let (m, v) = self.noised_component(k, t);
                let sq: S = x.iter().zip(&m).map(|(&xi, &mi)| (xi - mi) * (xi - mi)).sum();
                let lp = self.weights[k].ln() - S::lit(0.5) * d * (two_pi * v).ln() - sq / (S::lit(2.0) * v);
                (lp, m, v)
            })
            .collect()
    }

    /// `log p_t(x)` for the mixture pushed through the forward process.
    pub fn log_density_noised(&self, x: &[S], t: S) -> Result<S> {
        self.check_point(x, t)?;
        let terms = self.log_terms(x, t);
        Ok(log_sum_exp(terms.iter().map(|(lp, _, _)| *lp)))
    }

    /// Responsibilities and per-component scores `s_k = −(x − m_k)/v_k`.
    fn posterior(&self, x: &[S], t: S) -> (Vec<S>, Vec<Vec<S>>, Vec<S>) {
        let terms = self.log_terms(x, t);
        let lse = log_sum_exp(terms.iter().map(|(lp, _, _)| *lp));
        let mut r = Vec::with_capacity(terms.len());
        let mut sk = Vec::with_capacity(terms.len());
        let mut vk = Vec::with_capacity(terms.len());
        for (lp, m, v) in terms {
            r.push((lp - lse).exp());
            sk.push(x.iter().zip(&m).map(|(&xi, &mi)| -(xi - mi) / v).collect());
            vk.push(v);
        }
        (r, sk, vk)
    }

    /// `∇_x log p_t(x)`. At `t = 1` every component collapses onto the
    /// standard normal and the score is `−x`.
    pub fn score_noised(&self, x: &[S], t: S) -> Result<Vec<S>> {
        self.check_point(x, t)?;
        if t == S::one() {
            return Ok(x.iter().map(|&v| -v).collect());
        }
        let (r, sk, _) = self.posterior(x, t);
        let mut s = vec![S::zero(); x.len()];
        for (rk, s_k) in r.iter().zip(&sk) {
            for (acc, &v) in s.iter_mut().zip(s_k) {
                *acc += *rk * v;
            }
        }
        Ok(s)
    }

    /// Hessian of `log p_t` at `x`, row-major `D × D`:
    /// `Σ_k r_k (−I/v_k) + Σ_k r_k s_k s_kᵀ − s sᵀ`.
    pub fn score_jacobian(&self, x: &[S], t: S) -> Result<Tensor<S>> {
        self.check_point(x, t)?;
        let d = x.len();
        if t == S::one() {
            return Ok(Tensor::eye(d).scale(-S::one()));
        }
        let (r, sk, vk) = self.posterior(x, t);
        let mut s = vec![S::zero(); d];
        let mut h = Tensor::zeros(&[d, d]);
        for ((&rk, s_k), &v) in r.iter().zip(&sk).zip(&vk) {
            for i in 0..d {
                s[i] += rk * s_k[i];
                let row = h.row_mut(i);
                row[i] -= rk / v;
                for j in 0..d {
                    row[j] += rk * s_k[i] * s_k[j];
                }
            }
        }
        for i in 0..d {
            let row = h.row_mut(i);
            for j in 0..d {
                row[j] -= s[i] * s[j];
            }
        }
        Ok(h)
    }

    /// `E[x0 | x_t = x]`: per component `μ_k + (1−t)σ_k²/v_k · (x − (1−t)μ_k)`,
    /// weighted by the responsibilities at time `t`.
    pub fn posterior_mean(&self, x: &[S], t: S) -> Result<Vec<S>> {
        self.check_point(x, t)?;
        let a = S::one() - t;
        let (r, _, vk) = self.posterior(x, t);
        let live = (0..self.components()).filter(|&k| self.weights[k] > S::zero());
        let mut out = vec![S::zero(); x.len()];
        for ((k, &rk), &v) in live.zip(&r).zip(&vk) {
            let gain = a * self.variances[k] / v;
            for (o, (&xi, &mi)) in out.iter_mut().zip(x.iter().zip(self.mean(k))) {
                *o += rk * (mi + gain * (xi - a * mi));
            }
        }
        Ok(out)
    }

    /// End point at time 0 of the deterministic probability-flow path through
    /// `x` at time `t`, integrated with `steps` uniform steps of the update
    /// `x_s = (1−s)·x̂0 + s·ẑ`, `ẑ = (x_t − (1−t)·x̂0)/t`.
    pub fn flow_endpoint(&self, x: &[S], t: S, steps: usize) -> Result<Vec<S>> {
        self.check_point(x, t)?;
        if steps == 0 {
            return Err(Error::InvalidArgument("flow_endpoint needs at least one step".into()));
        }
        if t == S::zero() {
            return Ok(x.to_vec());
        }
        let mut cur = x.to_vec();
        let mut tc = t;
        for k in 1..=steps {
            let x0 = self.posterior_mean(&cur, tc)?;
            let next = t * S::from_count(steps - k) / S::from_count(steps);
            if next == S::zero() {
                return Ok(x0);
            }
            for (c, &m) in cur.iter_mut().zip(&x0) {
                let z = (*c - (S::one() - tc) * m) / tc;
                *c = (S::one() - next) * m + next * z;
            }
            tc = next;
        }
        unreachable!("the last step lands on t = 0")
    }

    /// Row-wise [`Self::flow_endpoint`].
    pub fn flow_endpoints(&self, x: &Tensor<S>, t: &[S], steps: usize) -> Result<Tensor<S>> {
        self.check_batch(x, t)?;
        let mut out = Vec::with_capacity(x.numel());
        for (i, &ti) in t.iter().enumerate() {
            out.extend(self.flow_endpoint(x.row(i), ti, steps)?);
        }
        Tensor::matrix(x.rows(), x.cols(), out)
    }

    /// Row-wise scores for a batch with one time per row.
    pub fn scores(&self, x: &Tensor<S>, t: &[S]) -> Result<Tensor<S>> {
        self.check_batch(x, t)?;
        let mut out = Vec::with_capacity(x.numel());
        for (i, &ti) in t.iter().enumerate() {
            out.extend(self.score_noised(x.row(i), ti)?);
        }
        Tensor::matrix(x.rows(), x.cols(), out)
    }

    /// Row-wise `J_iᵀ v_i`. The Jacobian is symmetric, so this is `J_i v_i`.
    pub fn scores_vjp(&self, x: &Tensor<S>, t: &[S], v: &Tensor<S>) -> Result<Tensor<S>> {
        self.check_batch(x, t)?;
        if v.shape() != x.shape() {
            return Err(Error::shape("mixture score vjp", v.shape(), x.shape()));
        }
        let d = x.cols();
        let mut out = Vec::with_capacity(x.numel());
        for (i, &ti) in t.iter().enumerate() {
            let h = self.score_jacobian(x.row(i), ti)?;
            let vi = v.row(i);
            for r in 0..d {
                out.push(h.row(r).iter().zip(vi).map(|(&a, &b)| a * b).sum());
            }
        }
        Tensor::matrix(x.rows(), d, out)
    }

    fn check_point(&self, x: &[S], t: S) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::shape("mixture point", &[x.len()], &[self.dim()]));
        }
        check_time(t)
    }

    fn check_batch(&self, x: &Tensor<S>, t: &[S]) -> Result<()> {
        if x.rank() != 2 || x.cols() != self.dim() {
            return Err(Error::shape("mixture batch", x.shape(), &[0, self.dim()]));
        }
        if t.len() != x.rows() {
            return Err(Error::shape("mixture batch times", &[t.len()], &[x.rows()]));
        }
        Ok(())
    }

    /// Index of the nearest component mean to `x`.
    pub fn nearest_mode(&self, x: &[S]) -> (usize, S) {
        let mut best = (0, S::infinity());
        for k in 0..self.components() {
            let d2: S = x.iter().zip(self.mean(k)).map(|(&a, &b)| (a - b) * (a - b)).sum();
            if d2 < best.1 {
                best = (k, d2);
            }
        }
        (best.0, best.1.sqrt())
    }
}

/// Serializable description of a synthetic target, laid out as a trajectory
/// of 2-D frames. Every frame of a sample shares its mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    /// Equal-weight modes evenly spaced on a circle.
    GmRing { modes: usize, radius: f64, sigma: f64 },
    /// `side × side` modes on a square lattice centred at the origin.
    GmGrid { side: usize, spacing: f64, sigma: f64 },
    /// Two equal-weight modes at `(±separation/2, 0)`.
    GmBimodal { separation: f64, sigma: f64 },
}

/// Per-frame extent of the toy videos.
pub const FRAME_DIM: usize = 2;

impl TargetSpec {
    pub fn ring_default() -> Self {
        TargetSpec::GmRing {
            modes: 8,
            radius: 4.0,
            sigma: 0.2,
        }
    }

    pub fn sigma(&self) -> f64 {
        match *self {
            TargetSpec::GmRing { sigma, .. }
            | TargetSpec::GmGrid { sigma, .. }
            | TargetSpec::GmBimodal { sigma, .. } => sigma,
        }
    }

    fn base_means(&self) -> Result<Vec<[f64; 2]>> {
        let means = match *self {
            TargetSpec::GmRing { modes, radius, .. } => (0..modes)
                .map(|k| {
                    let a = 2.0 * std::f64::consts::PI * k as f64 / modes as f64;
                    [radius * a.cos(), radius * a.sin()]
                })
                .collect(),
            TargetSpec::GmGrid { side, spacing, .. } => {
                let off = (side as f64 - 1.0) / 2.0;
                (0..side * side)
                    .map(|k| [((k % side) as f64 - off) * spacing, ((k / side) as f64 - off) * spacing])
                    .collect()
            }
            TargetSpec::GmBimodal { separation, .. } => {
                vec![[-separation / 2.0, 0.0], [separation / 2.0, 0.0]]
            }
        };
        Ok(means)
    }

    pub fn validate(&self) -> Result<()> {
        let sigma = self.sigma();
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::Config(format!("target sigma must be positive, got {sigma}")));
        }
        match *self {
            TargetSpec::GmRing { modes, radius, .. } if modes == 0 || !radius.is_finite() => {
                Err(Error::Config("gm_ring needs modes > 0 and a finite radius".into()))
            }
            TargetSpec::GmGrid { side, spacing, .. } if side == 0 || !spacing.is_finite() => {
                Err(Error::Config("gm_grid needs side > 0 and a finite spacing".into()))
            }
            TargetSpec::GmBimodal { separation, .. } if !separation.is_finite() => {
                Err(Error::Config("gm_bimodal needs a finite separation".into()))
            }
            _ => Ok(()),
        }
    }

    /// Mixture over `frames · FRAME_DIM` dimensions.
    pub fn build<S: Real>(&self, frames: usize) -> Result<GaussianMixture<S>> {
        self.validate()?;
        if frames == 0 {
            return Err(Error::Config("frames must be positive".into()));
        }
        let base = self.base_means()?;
        let k = base.len();
        let mut means = Vec::with_capacity(k * frames * FRAME_DIM);
        for m in &base {
            for _ in 0..frames {
                means.extend(m.iter().map(|&v| S::lit(v)));
            }
        }
        let var = S::lit(self.sigma() * self.sigma());
        GaussianMixture::new(
            vec![S::one() / S::from_count(k); k],
            Tensor::matrix(k, frames * FRAME_DIM, means)?,
            vec![var; k],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn posterior_mean_satisfies_tweedie() {
        let gm = two_mode();
        for &(x, t) in &[([0.3, -0.2], 0.3), ([1.1, 0.9], 0.6), ([-2.0, 0.4], 0.9)] {
            let m = gm.posterior_mean(&x, t).unwrap();
            let s = gm.score_noised(&x, t).unwrap();
            for k in 0..2 {
                let tweedie = (x[k] + t * t * s[k]) / (1.0 - t);
                assert!((m[k] - tweedie).abs() < 1e-12, "{} vs {tweedie}", m[k]);
            }
        }
        let at_one = gm.posterior_mean(&[5.0, -5.0], 1.0).unwrap();
        assert!((at_one[0] - (0.3 * -1.0 + 0.7 * 1.5)).abs() < 1e-12);
    }

    #[test]
    fn gaussian_flow_is_the_affine_transport_map() {
        // For N(μ, σ²) the flow sends x_t to μ + σ/√v_t · (x_t − (1−t)μ).
        let (mu, var) = (vec![1.0, -2.0], 0.25);
        let gm = GaussianMixture::<f64>::gaussian(mu.clone(), var).unwrap();
        let x = [0.4, 0.9];
        for t in [1.0, 0.75, 0.3] {
            let v = (1.0 - t) * (1.0 - t) * var + t * t;
            let got = gm.flow_endpoint(&x, t, 4000).unwrap();
            for k in 0..2 {
                let want = mu[k] + (var / v).sqrt() * (x[k] - (1.0 - t) * mu[k]);
                assert!((got[k] - want).abs() < 1e-3, "t={t}: {} vs {want}", got[k]);
            }
        }
        assert_eq!(gm.flow_endpoint(&x, 0.0, 3).unwrap(), x.to_vec());
        assert!(gm.flow_endpoint(&x, 0.5, 0).is_err());
    }

    #[test]
    fn flow_from_noise_covers_the_ring() {
        let gm = TargetSpec::ring_default().build::<f64>(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let z = crate::gen::standard_normal::<f64, _>(800, 2, &mut rng);
        let out = gm.flow_endpoints(&z, &[1.0; 800], 64).unwrap();
        let mut counts = [0usize; 8];
        for i in 0..800 {
            let (k, d) = gm.nearest_mode(out.row(i));
            assert!(d < 1.0, "{d}");
            counts[k] += 1;
        }
        assert!(counts.iter().all(|&c| (60..=140).contains(&c)), "{counts:?}");
    }

    fn two_mode() -> GaussianMixture<f64> {
        GaussianMixture::new(
            vec![0.3, 0.7],
            Tensor::from_rows(&[[-1.0, 0.5], [1.5, -0.5]]).unwrap(),
            vec![0.2, 0.5],
        )
        .unwrap()
    }

    #[test]
    fn standard_normal_score() {
        let gm = GaussianMixture::<f64>::gaussian(vec![0.0, 0.0], 1.0).unwrap();
        for t in [0.0, 0.3, 0.7] {
            let x = [0.4, -1.2];
            let s = gm.score_noised(&x, t).unwrap();
            let v = (1.0 - t) * (1.0 - t) + t * t;
            assert!((s[0] + x[0] / v).abs() < 1e-14 && (s[1] + x[1] / v).abs() < 1e-14);
        }
        assert_eq!(gm.score_noised(&[0.0, 0.0], 0.5).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn unnoised_gaussian_score() {
        let gm = GaussianMixture::<f64>::gaussian(vec![1.0, -2.0], 0.25).unwrap();
        let s = gm.score_noised(&[2.0, 0.0], 0.0).unwrap();
        assert!((s[0] + 4.0).abs() < 1e-12 && (s[1] + 8.0).abs() < 1e-12);
    }

    #[test]
    fn pure_noise_branch() {
        let s = two_mode().score_noised(&[0.3, -0.8], 1.0).unwrap();
        assert_eq!(s, vec![-0.3, 0.8]);
    }

    #[test]
    fn score_matches_log_density_differences() {
        let gm = two_mode();
        let h = 1e-5;
        for (x, t) in [([0.2, 0.1], 0.3), ([-1.0, 0.4], 0.05), ([2.0, -1.0], 0.8)] {
            let s = gm.score_noised(&x, t).unwrap();
            for k in 0..2 {
                let (mut p, mut m) = (x, x);
                p[k] += h;
                m[k] -= h;
                let fd = (gm.log_density_noised(&p, t).unwrap() - gm.log_density_noised(&m, t).unwrap()) / (2.0 * h);
                assert!((fd - s[k]).abs() / s[k].abs().max(1e-3) < 1e-6, "{fd} vs {}", s[k]);
            }
        }
    }

    #[test]
    fn jacobian_matches_score_differences() {
        let gm = two_mode();
        let x = [0.3, -0.1];
        let t = 0.4;
        let h = 1e-6;
        let jac = gm.score_jacobian(&x, t).unwrap();
        for j in 0..2 {
            let (mut p, mut m) = (x, x);
            p[j] += h;
            m[j] -= h;
            let sp = gm.score_noised(&p, t).unwrap();
            let sm = gm.score_noised(&m, t).unwrap();
            for i in 0..2 {
                let fd = (sp[i] - sm[i]) / (2.0 * h);
                assert!((fd - jac.at(i, j)).abs() < 1e-6, "{fd} vs {}", jac.at(i, j));
            }
        }
        assert!((jac.at(0, 1) - jac.at(1, 0)).abs() < 1e-14);
    }

    #[test]
    fn degenerate_weights_sample_one_component() {
        let gm = GaussianMixture::new(
            vec![1.0, 0.0],
            Tensor::from_rows(&[[-10.0], [10.0]]).unwrap(),
            vec![1.0, 1.0],
        )
        .unwrap();
        let x = gm.sample(500, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert!(x.data().iter().all(|&v| v < 0.0));
    }

    #[test]
    fn standard_normal_sample_mean() {
        let gm = GaussianMixture::gaussian(vec![0.0; 3], 1.0).unwrap();
        let n = 20_000;
        let x = gm.sample(n, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        for c in 0..3 {
            let mean: f64 = (0..n).map(|i| x.at(i, c)).sum::<f64>() / n as f64;
            assert!(mean.abs() < 4.0 / (n as f64).sqrt());
        }
    }

    #[test]
    fn ring_modes_receive_balanced_shares() {
        let gm: GaussianMixture<f64> = TargetSpec::ring_default().build(1).unwrap();
        let x = gm.sample(4000, &mut ChaCha8Rng::seed_from_u64(2024)).unwrap();
        let mut counts = [0usize; 8];
        for i in 0..4000 {
            counts[gm.nearest_mode(x.row(i)).0] += 1;
        }
        for c in counts {
            let share = c as f64 / 4000.0;
            assert!((0.08..=0.17).contains(&share), "{counts:?}");
        }
    }

    #[test]
    fn target_specs_parse_and_build() {
        let spec: TargetSpec =
            serde_json::from_str(r#"{"type":"gm_ring","modes":8,"radius":4.0,"sigma":0.2}"#).unwrap();
        assert_eq!(spec, TargetSpec::ring_default());
        let gm: GaussianMixture<f64> = spec.build(4).unwrap();
        assert_eq!((gm.components(), gm.dim()), (8, 8));
        assert_eq!(gm.mean(2), &[gm.mean(2)[0], gm.mean(2)[1]].repeat(4)[..]);
        let grid: TargetSpec = serde_json::from_str(r#"{"type":"gm_grid","side":3,"spacing":2.0,"sigma":0.1}"#).unwrap();
        assert_eq!(grid.build::<f64>(1).unwrap().components(), 9);
        assert!(serde_json::from_str::<TargetSpec>(r#"{"type":"gm_ring","modes":8,"radius":4.0,"sigma":0.2,"x":1}"#).is_err());
        assert!(TargetSpec::GmBimodal { separation: 8.0, sigma: 0.0 }.build::<f64>(1).is_err());
    }

    #[test]
    fn rejects_bad_mixtures() {
        let m = Tensor::from_rows(&[[0.0], [1.0]]).unwrap();
        assert!(GaussianMixture::new(vec![0.5, 0.6], m.clone(), vec![1.0, 1.0]).is_err());
        assert!(GaussianMixture::new(vec![0.5, 0.5], m.clone(), vec![1.0, 0.0]).is_err());
        assert!(GaussianMixture::new(vec![1.0], m, vec![1.0]).is_err());
        assert!(two_mode().score_noised(&[0.0, 0.0], 1.5).is_err());
    }
}
