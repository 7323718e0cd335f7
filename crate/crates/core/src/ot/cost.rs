use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::scalar::Real;

/// `I × J` ground-cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix<S>(Tensor<S>);

impl<S: Real> CostMatrix<S> {
    pub fn new(values: Tensor<S>) -> Result<Self> {
        if values.rank() != 2 {
            return Err(Error::InvalidShape(format!(
                "cost matrix must be 2-D, got {:?}",
                values.shape()
            )));
        }
        if !values.is_finite() {
            return Err(Error::NonFinite("cost matrix".into()));
        }
        Ok(Self(values))
    }

    pub fn from_rows<R: AsRef<[S]>>(rows: &[R]) -> Result<Self> {
        Self::new(Tensor::from_rows(rows)?)
    }

    pub fn values(&self) -> &Tensor<S> {
        &self.0
    }

    pub fn rows(&self) -> usize {
        self.0.shape()[0]
    }

    pub fn cols(&self) -> usize {
        self.0.shape()[1]
    }

    pub fn at(&self, i: usize, j: usize) -> S {
        self.0.at(i, j)
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose().expect("cost matrices are 2-D"))
    }
}

/// Source weights `u` and target weights `mu`, each on the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginals<S> {
    u: Vec<S>,
    mu: Vec<S>,
}

impl<S: Real> Marginals<S> {
    pub fn new(u: Vec<S>, mu: Vec<S>) -> Result<Self> {
        check_simplex("u", &u)?;
        check_simplex("mu", &mu)?;
        Ok(Self { u, mu })
    }

    pub fn uniform(i: usize, j: usize) -> Self {
        Self {
            u: vec![S::one() / S::from_count(i); i],
            mu: vec![S::one() / S::from_count(j); j],
        }
    }

    pub fn u(&self) -> &[S] {
        &self.u
    }

    pub fn mu(&self) -> &[S] {
        &self.mu
    }

    pub fn swapped(&self) -> Self {
        Self {
            u: self.mu.clone(),
            mu: self.u.clone(),
        }
    }

    /// Whether both marginals are uniform and of equal length.
    pub fn is_uniform_square(&self) -> bool {
        let n = self.u.len();
        let w = S::one() / S::from_count(n);
        let tol = S::lit(1e-12).max(S::epsilon() * S::lit(4.0));
        n == self.mu.len()
            && self
                .u
                .iter()
                .chain(&self.mu)
                .all(|&x| (x - w).abs() <= tol)
    }
}

fn check_simplex<S: Real>(name: &str, w: &[S]) -> Result<()> {
    if w.is_empty() {
        return Err(Error::InvalidArgument(format!("marginal {name} is empty")));
    }
    if let Some(bad) = w.iter().find(|&&x| !(x > S::zero()) || !x.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "marginal {name} has non-positive weight {bad}"
        )));
    }
    let total: S = w.iter().copied().sum();
    // 1e-12 in double precision; scaled up to the type's resolution otherwise.
    let tol = S::lit(1e-12).max(S::epsilon() * S::from_count(4 * w.len()));
    if (total - S::one()).abs() > tol {
        return Err(Error::InvalidArgument(format!(
            "marginal {name} sums to {total}, not 1"
        )));
    }
    Ok(())
}

/// `D_ij = ½‖a_i − b_j‖²` for samples stored as rows.
pub fn pairwise_half_sq_euclidean<S: Real>(a: &Tensor<S>, b: &Tensor<S>) -> Result<CostMatrix<S>> {
    if a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols() {
        return Err(Error::shape("pairwise_half_sq_euclidean", a.shape(), b.shape()));
    }
    let (i_n, j_n) = (a.rows(), b.rows());
    let half = S::lit(0.5);
    let mut out = Vec::with_capacity(i_n * j_n);
    for i in 0..i_n {
        let ai = a.row(i);
        for j in 0..j_n {
            let d2: S = ai
                .iter()
                .zip(b.row(j))
                .fold(S::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y));
            out.push(half * d2);
        }
    }
    CostMatrix::new(Tensor::matrix(i_n, j_n, out)?)
}
