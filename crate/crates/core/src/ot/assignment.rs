//! Exhaustive assignment solver used as an exact reference for small uniform
//! problems. With uniform square marginals the extreme points of the
//! transport polytope are scaled permutation matrices, so enumerating all
//! permutations yields the unregularised optimum.

use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::ot::cost::{CostMatrix, Marginals};
use crate::scalar::Real;

pub const MAX_ORACLE_SIZE: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment<S> {
    /// `⟨D, T⟩` at the optimal permutation plan.
    pub value: S,
    /// `permutation[i]` is the column matched to row `i`.
    pub permutation: Vec<usize>,
    /// Permutation matrix scaled by `1/n`.
    pub plan: Tensor<S>,
}

/// Minimum of `⟨D, T⟩` over permutation plans, by lexicographic enumeration.
/// Ties keep the earliest permutation.
pub fn exact_assignment_oracle<S: Real>(d: &CostMatrix<S>, m: &Marginals<S>) -> Result<Assignment<S>> {
    let n = d.rows();
    if d.cols() != n {
        return Err(Error::InvalidArgument(format!(
            "assignment oracle needs a square cost, got {}x{}",
            n,
            d.cols()
        )));
    }
    if n > MAX_ORACLE_SIZE {
        return Err(Error::InvalidArgument(format!(
            "assignment oracle is limited to n <= {MAX_ORACLE_SIZE}, got {n}"
        )));
    }
    if m.u().len() != n || !m.is_uniform_square() {
        return Err(Error::InvalidArgument(
            "assignment oracle needs uniform square marginals".into(),
        ));
    }

    let weight = S::one() / S::from_count(n);
    let cost_of = |p: &[usize]| -> S {
        p.iter()
            .enumerate()
            .fold(S::zero(), |acc, (i, &j)| acc + d.at(i, j))
            * weight
    };

    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    let mut best_value = cost_of(&perm);
    while next_permutation(&mut perm) {
        let v = cost_of(&perm);
        if v < best_value {
            best_value = v;
            best.clone_from(&perm);
        }
    }

    let mut plan = Tensor::zeros(&[n, n]);
    for (i, &j) in best.iter().enumerate() {
        plan.set(i, j, weight);
    }
    Ok(Assignment {
        value: best_value,
        permutation: best,
        plan,
    })
}

/// Minimum-cost perfect matching on a square cost by the shortest
/// augmenting path form of the Hungarian method, `O(n³)`. Plan and value
/// use uniform `1/n` weights, matching [`exact_assignment_oracle`].
pub fn hungarian<S: Real>(d: &CostMatrix<S>) -> Result<Assignment<S>> {
    let n = d.rows();
    if d.cols() != n || n == 0 {
        return Err(Error::InvalidArgument(format!(
            "hungarian needs a non-empty square cost, got {}x{}",
            n,
            d.cols()
        )));
    }
    // 1-based potentials; column 0 is a virtual start.
    let inf = S::infinity();
    let mut u = vec![S::zero(); n + 1];
    let mut v = vec![S::zero(); n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = d.at(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut permutation = vec![0; n];
    for j in 1..=n {
        permutation[owner[j] - 1] = j - 1;
    }
    let weight = S::one() / S::from_count(n);
    let mut plan = Tensor::zeros(&[n, n]);
    let mut value = S::zero();
    for (i, &j) in permutation.iter().enumerate() {
        plan.set(i, j, weight);
        value += d.at(i, j);
    }
    Ok(Assignment {
        value: value * weight,
        permutation,
        plan,
    })
}

fn next_permutation(p: &mut [usize]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let mut i = p.len() - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = p.len() - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn enumerates_every_permutation_once() {
        let mut p = vec![0, 1, 2, 3];
        let mut count = 1;
        while next_permutation(&mut p) {
            count += 1;
        }
        assert_eq!(count, 24);
    }

    #[test]
    fn zero_cost_diagonal() {
        let d = CostMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let a = exact_assignment_oracle(&d, &Marginals::uniform(2, 2)).unwrap();
        assert_eq!(a.value, 0.0);
        assert_eq!(a.plan.data(), &[0.5, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn constant_cost_returns_first_permutation() {
        let d = CostMatrix::<f64>::new(Tensor::ones(&[3, 3])).unwrap();
        let a = exact_assignment_oracle(&d, &Marginals::uniform(3, 3)).unwrap();
        assert!((a.value - 1.0).abs() < 1e-15);
        assert_eq!(a.permutation, vec![0, 1, 2]);
    }

    /// Greedy matching followed by pairwise-swap descent; any permutation it
    /// finds is an upper bound on the exact optimum.
    fn greedy_two_swap(d: &CostMatrix<f64>) -> f64 {
        let n = d.rows();
        let mut used = vec![false; n];
        let mut perm = vec![0; n];
        for i in 0..n {
            let j = (0..n)
                .filter(|&j| !used[j])
                .min_by(|&a, &b| d.at(i, a).total_cmp(&d.at(i, b)))
                .unwrap();
            used[j] = true;
            perm[i] = j;
        }
        let total = |p: &[usize]| p.iter().enumerate().map(|(i, &j)| d.at(i, j)).sum::<f64>() / n as f64;
        let mut improved = true;
        while improved {
            improved = false;
            for a in 0..n {
                for b in a + 1..n {
                    let mut q = perm.clone();
                    q.swap(a, b);
                    if total(&q) < total(&perm) - 1e-15 {
                        perm = q;
                        improved = true;
                    }
                }
            }
        }
        total(&perm)
    }

    #[test]
    fn never_worse_than_local_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let d = Tensor::matrix(5, 5, (0..25).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
            let d = CostMatrix::new(d).unwrap();
            let exact = exact_assignment_oracle(&d, &Marginals::uniform(5, 5)).unwrap();
            assert!(exact.value <= greedy_two_swap(&d) + 1e-15);
        }
    }

    #[test]
    fn hungarian_agrees_with_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=7 {
            for _ in 0..10 {
                let d = Tensor::<f64>::matrix(n, n, (0..n * n).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
                let d = CostMatrix::new(d).unwrap();
                let exact = exact_assignment_oracle(&d, &Marginals::uniform(n, n)).unwrap();
                let h = hungarian(&d).unwrap();
                assert!((exact.value - h.value).abs() < 1e-12, "{} vs {}", exact.value, h.value);
                let mut seen = h.permutation.clone();
                seen.sort();
                assert_eq!(seen, (0..n).collect::<Vec<_>>());
            }
        }
        assert!(hungarian(&CostMatrix::<f64>::new(Tensor::ones(&[2, 3])).unwrap()).is_err());
    }

    #[test]
    fn rejects_non_square_and_non_uniform() {
        let d = CostMatrix::<f64>::new(Tensor::ones(&[2, 3])).unwrap();
        assert!(exact_assignment_oracle(&d, &Marginals::uniform(2, 3)).is_err());
        let d = CostMatrix::<f64>::new(Tensor::ones(&[2, 2])).unwrap();
        let skewed = Marginals::new(vec![0.25, 0.75], vec![0.5, 0.5]).unwrap();
        assert!(exact_assignment_oracle(&d, &skewed).is_err());
        let big = CostMatrix::<f64>::new(Tensor::ones(&[9, 9])).unwrap();
        assert!(exact_assignment_oracle(&big, &Marginals::uniform(9, 9)).is_err());
    }
}
