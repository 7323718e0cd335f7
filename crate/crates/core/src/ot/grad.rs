use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::scalar::Real;

/// Gradients of the transport value with respect to both sample clouds.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGradients<S> {
    pub wrt_a: Tensor<S>,
    pub wrt_b: Tensor<S>,
}

/// Envelope-theorem gradients for the ½-squared-Euclidean cost, holding the
/// plan fixed:
///
/// `∇a_i = Σ_j T_ij (a_i − b_j)`, `∇b_j = Σ_i T_ij (b_j − a_i)`.
pub fn grad_wrt_samples<S: Real>(a: &Tensor<S>, b: &Tensor<S>, plan: &Tensor<S>) -> Result<SampleGradients<S>> {
    if a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols() {
        return Err(Error::shape("grad_wrt_samples", a.shape(), b.shape()));
    }
    let (i_n, j_n, dim) = (a.rows(), b.rows(), a.cols());
    if plan.shape() != [i_n, j_n] {
        return Err(Error::shape("grad_wrt_samples plan", plan.shape(), &[i_n, j_n]));
    }
    let mut ga = Tensor::zeros(&[i_n, dim]);
    let mut gb = Tensor::zeros(&[j_n, dim]);
    for i in 0..i_n {
        for j in 0..j_n {
            let t = plan.at(i, j);
            if t == S::zero() {
                continue;
            }
            for k in 0..dim {
                let diff = a.at(i, k) - b.at(j, k);
                ga.row_mut(i)[k] += t * diff;
                gb.row_mut(j)[k] -= t * diff;
            }
        }
    }
    Ok(SampleGradients { wrt_a: ga, wrt_b: gb })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::{pairwise_half_sq_euclidean, sinkhorn_log, Marginals, SinkhornConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn coincident_coupling_has_zero_gradient() {
        let a = Tensor::from_rows(&[[1.0, 2.0], [-1.0, 0.5]]).unwrap();
        let plan = Tensor::from_rows(&[[0.5, 0.0], [0.0, 0.5]]).unwrap();
        let g = grad_wrt_samples(&a, &a, &plan).unwrap();
        assert!(g.wrt_a.data().iter().chain(g.wrt_b.data()).all(|&v| v == 0.0));
    }

    #[test]
    fn single_pair_is_the_difference() {
        let a = Tensor::from_rows(&[[1.0, -2.0]]).unwrap();
        let b = Tensor::from_rows(&[[0.5, 3.0]]).unwrap();
        let g = grad_wrt_samples(&a, &b, &Tensor::from_rows(&[[1.0]]).unwrap()).unwrap();
        assert_eq!(g.wrt_a.data(), &[0.5, -5.0]);
        assert_eq!(g.wrt_b.data(), &[-0.5, 5.0]);
    }

    #[test]
    fn matches_finite_differences_of_resolved_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let cfg = SinkhornConfig {
            epsilon: 0.1,
            tol: 1e-12,
            max_iter: 20000,
        };
        let value = |a: &Tensor<f64>, b: &Tensor<f64>| {
            let d = pairwise_half_sq_euclidean(a, b).unwrap();
            sinkhorn_log(&d, &Marginals::uniform(a.rows(), b.rows()), &cfg).unwrap().value
        };
        let a = Tensor::matrix(4, 2, (0..8).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let b = Tensor::matrix(3, 2, (0..6).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let d = pairwise_half_sq_euclidean(&a, &b).unwrap();
        let sol = sinkhorn_log(&d, &Marginals::uniform(4, 3), &cfg).unwrap();
        let g = grad_wrt_samples(&a, &b, &sol.plan).unwrap();
        let h = 1e-4;
        for k in 0..a.numel() {
            let (mut p, mut m) = (a.clone(), a.clone());
            p.data_mut()[k] += h;
            m.data_mut()[k] -= h;
            let fd = (value(&p, &b) - value(&m, &b)) / (2.0 * h);
            let an = g.wrt_a.data()[k];
            assert!((fd - an).abs() / fd.abs().max(an.abs()).max(1e-6) < 1e-3, "{fd} vs {an}");
        }
    }

    #[test]
    fn rejects_mismatched_plan() {
        let a = Tensor::<f64>::zeros(&[2, 2]);
        assert!(grad_wrt_samples(&a, &a, &Tensor::zeros(&[2, 3])).is_err());
    }
}
