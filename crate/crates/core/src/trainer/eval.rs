use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gen::{add_noise_batch, standard_normal, GaussianMixture, NoiseSchedule};
use crate::nn::Tensor;
use crate::objectives::{DenoiserScore, ScoreFunction};
use crate::ot::{hungarian, pairwise_half_sq_euclidean};
use crate::trainer::state::Trainer;

pub const MAX_EVAL_SAMPLES: usize = 512;
/// A mode counts as covered when a sample lands within this many standard
/// deviations of its mean.
pub const COVERAGE_SIGMAS: f64 = 3.0;
const EVAL_SALT: u64 = 0x5eed_e7a1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub w2: f64,
    pub mode_coverage: f64,
    pub score_error: f64,
}

/// `sqrt(2·⟨D, T⟩)` for the half-squared cost at the optimal matching of
/// two equal-size clouds. This is the small-ε limit of the entropic value;
/// plain Sinkhorn at ε = 1e-3 is far from converged at evaluation sizes.
pub fn w2_distance(a: &Tensor<f64>, b: &Tensor<f64>) -> Result<f64> {
    if a.rows() != b.rows() {
        return Err(Error::shape("w2_distance", a.shape(), b.shape()));
    }
    let d = pairwise_half_sq_euclidean(a, b)?;
    Ok((2.0 * hungarian(&d)?.value).max(0.0).sqrt())
}

/// Fraction of samples nearest to each mode.
pub fn mode_fractions(target: &GaussianMixture<f64>, samples: &Tensor<f64>) -> Vec<f64> {
    let mut counts = vec![0usize; target.components()];
    for i in 0..samples.rows() {
        counts[target.nearest_mode(samples.row(i)).0] += 1;
    }
    let n = samples.rows().max(1) as f64;
    counts.into_iter().map(|c| c as f64 / n).collect()
}

/// Fraction of modes with at least one sample within
/// [`COVERAGE_SIGMAS`] standard deviations.
pub fn mode_coverage(target: &GaussianMixture<f64>, samples: &Tensor<f64>) -> f64 {
    let k = target.components();
    let mut hit = vec![false; k];
    for i in 0..samples.rows() {
        let (m, dist) = target.nearest_mode(samples.row(i));
        if dist <= COVERAGE_SIGMAS * target.variances()[m].sqrt() {
            hit[m] = true;
        }
    }
    hit.iter().filter(|&&h| h).count() as f64 / k as f64
}

/// Steps whose gradient norm exceeds `factor` times the median of the
/// preceding `window` norms.
pub fn collapse_steps(norms: &[f64], window: usize, factor: f64) -> Vec<usize> {
    let mut out = Vec::new();
    for i in 1..norms.len() {
        let mut prev: Vec<f64> = norms[i.saturating_sub(window)..i].to_vec();
        prev.sort_by(f64::total_cmp);
        let median = prev[prev.len() / 2];
        if norms[i] > factor * median {
            out.push(i);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroForcingReport {
    pub mode_fractions: Vec<f64>,
    /// Modes that received no samples at all.
    pub empty_modes: Vec<usize>,
    pub collapse_steps: Vec<usize>,
}

impl Trainer {
    fn eval_rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.config().seed ^ EVAL_SALT)
    }

    /// Metrics on `n` generator samples against `n` target samples, using a
    /// fixed evaluation stream so repeated calls agree.
    pub fn evaluate(&self, n: usize) -> Result<Evaluation> {
        self.evaluate_with(self.config().schedule.clone(), n)
    }

    pub fn evaluate_with(&self, schedule: NoiseSchedule, n: usize) -> Result<Evaluation> {
        if n == 0 || n > MAX_EVAL_SAMPLES {
            return Err(Error::InvalidArgument(format!(
                "evaluation needs 1..={MAX_EVAL_SAMPLES} samples, got {n}"
            )));
        }
        let mut rng = self.eval_rng();
        let fake = self.generate_with(&schedule, n, &mut rng)?;
        let real = self.target().sample(n, &mut rng)?;
        let w2 = w2_distance(&fake, &real)?;

        let steps = self.config().schedule.steps();
        let t: Vec<f64> = (0..n).map(|i| steps[i % steps.len()]).collect();
        let noise = standard_normal(n, real.cols(), &mut rng);
        let x_t = add_noise_batch(&real, &t, &noise)?;
        let s_fake = DenoiserScore { net: &self.state().fake }.scores(&x_t, &t)?;
        let s_real = self.target().scores(&x_t, &t)?;
        let diff = s_fake.sub(&s_real)?;
        let score_error = (0..n)
            .map(|i| diff.row(i).iter().map(|v| v * v).sum::<f64>().sqrt())
            .sum::<f64>()
            / n as f64;
        Ok(Evaluation {
            w2,
            mode_coverage: mode_coverage(self.target(), &fake),
            score_error,
        })
    }

    pub fn zero_forcing_diagnostic(&self, n: usize) -> Result<ZeroForcingReport> {
        let mut rng = self.eval_rng();
        let fake = self.generate(n, &mut rng)?;
        let mode_fractions = mode_fractions(self.target(), &fake);
        let empty_modes = (0..mode_fractions.len()).filter(|&k| mode_fractions[k] == 0.0).collect();
        Ok(ZeroForcingReport {
            mode_fractions,
            empty_modes,
            collapse_steps: collapse_steps(self.grad_norms(), 50, 100.0),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::TargetSpec;
    use crate::ot::{exact_assignment_oracle, sinkhorn_log, Marginals, SinkhornConfig};

    const GOLDEN_NORMAL_W2: f64 = 0.30379;

    #[test]
    fn w2_of_shifted_clouds_is_the_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = standard_normal::<f64, _>(32, 2, &mut rng);
        let mut b = a.clone();
        for i in 0..32 {
            b.row_mut(i)[0] += 0.5;
        }
        assert!((w2_distance(&a, &b).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(w2_distance(&a, &a).unwrap(), 0.0);
        assert!(w2_distance(&a, &b.slice(0, 0..4).unwrap()).is_err());
    }

    #[test]
    fn w2_of_standard_normal_clouds_matches_golden() {
        let mut rng = ChaCha8Rng::seed_from_u64(256);
        let a = standard_normal::<f64, _>(256, 2, &mut rng);
        let b = standard_normal::<f64, _>(256, 2, &mut rng);
        let w = w2_distance(&a, &b).unwrap();
        assert!((w - GOLDEN_NORMAL_W2).abs() < 0.05 * GOLDEN_NORMAL_W2, "{w}");
    }

    #[test]
    fn w2_agrees_with_the_oracle_and_converged_sinkhorn() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let a = standard_normal::<f64, _>(8, 2, &mut rng);
            let b = standard_normal::<f64, _>(8, 2, &mut rng);
            let d = pairwise_half_sq_euclidean(&a, &b).unwrap();
            let m = Marginals::uniform(8, 8);
            let oracle = (2.0 * exact_assignment_oracle(&d, &m).unwrap().value).sqrt();
            let w = w2_distance(&a, &b).unwrap();
            assert!((w - oracle).abs() < 1e-12);
            let cfg = SinkhornConfig {
                epsilon: 1e-3,
                tol: 1e-9,
                max_iter: 200_000,
            };
            let sol = sinkhorn_log(&d, &m, &cfg).unwrap();
            let entropic = (2.0 * sol.transport_cost(&d)).sqrt();
            assert!((entropic - w).abs() < 1e-2 * w, "{entropic} vs {w}");
        }
    }

    #[test]
    fn coverage_counts_nearby_modes_only() {
        let gm = TargetSpec::ring_default().build::<f64>(1).unwrap();
        let mut x = Tensor::zeros(&[3, 2]);
        x.row_mut(0).copy_from_slice(gm.mean(0));
        x.row_mut(1).copy_from_slice(gm.mean(3));
        assert!((mode_coverage(&gm, &x) - 0.25).abs() < 1e-12);
        let f = mode_fractions(&gm, &x);
        assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let all = gm.sample(400, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(mode_coverage(&gm, &all), 1.0);
    }

    #[test]
    fn exact_target_samples_score_well() {
        let gm = TargetSpec::ring_default().build::<f64>(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = gm.sample(256, &mut rng).unwrap();
        let b = gm.sample(256, &mut rng).unwrap();
        // Mode counts differ between draws; moving that surplus between
        // neighbouring modes is most of the distance.
        let w = w2_distance(&a, &b).unwrap();
        assert!(w < 1.5, "{w}");
        assert_eq!(mode_coverage(&gm, &a), 1.0);
    }

    #[test]
    fn collapse_detection() {
        let mut norms = vec![1.0; 20];
        norms[12] = 500.0;
        assert_eq!(collapse_steps(&norms, 10, 100.0), vec![12]);
        assert!(collapse_steps(&[1.0], 10, 100.0).is_empty());
    }

    #[test]
    fn evaluation_is_repeatable() {
        let cfg = crate::trainer::TrainConfig {
            frames: 1,
            batch_size: 8,
            generator_hidden: vec![8],
            fake_hidden: vec![8; 4],
            ..Default::default()
        };
        let tr = Trainer::new(cfg).unwrap();
        let a = tr.evaluate(64).unwrap();
        assert_eq!(a, tr.evaluate(64).unwrap());
        assert!(a.w2 > 0.0 && a.score_error > 0.0);
        assert!(tr.evaluate(0).is_err() && tr.evaluate(MAX_EVAL_SAMPLES + 1).is_err());
        let z = tr.zero_forcing_diagnostic(64).unwrap();
        assert_eq!(z.mode_fractions.len(), 8);
    }
}
