//! Dense row-major tensors.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dense row-major array of real values.
///
/// The data length always equals the product of the shape extents; a
/// zero-rank tensor holds exactly one value.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<S> {
    shape: Vec<usize>,
    data: Vec<S>,
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl<S: Real> Tensor<S> {
    pub fn new(shape: Vec<usize>, data: Vec<S>) -> Result<Self> {
        if numel(&shape) != data.len() {
            return Err(Error::InvalidShape(format!(
                "shape {:?} holds {} values, got {}",
                shape,
                numel(&shape),
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn full(shape: &[usize], value: S) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![value; numel(shape)],
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, S::zero())
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, S::one())
    }

    pub fn scalar(value: S) -> Self {
        Self {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    pub fn vector(data: Vec<S>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<S>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[S]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::InvalidShape(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(vec![rows.len(), cols], data)
    }

    /// Identity matrix.
    pub fn eye(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = S::one();
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// Row count of a matrix.
    pub fn rows(&self) -> usize {
        match self.shape.len() {
            0 => 1,
            1 => 1,
            _ => self.shape[0],
        }
    }

    /// Column count of a matrix (trailing extent).
    pub fn cols(&self) -> usize {
        self.shape.last().copied().unwrap_or(1)
    }

    pub fn row(&self, i: usize) -> &[S] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [S] {
        let c = self.cols();
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn at(&self, i: usize, j: usize) -> S {
        self.data[i * self.cols() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: S) {
        let c = self.cols();
        self.data[i * c + j] = v;
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> Result<S> {
        if self.data.len() == 1 {
            Ok(self.data[0])
        } else {
            Err(Error::NotScalar(self.shape.clone()))
        }
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(self, op: &str) -> Result<Self> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(Error::NonFinite(op.to_string()))
        }
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise combination of two equally shaped tensors.
    pub fn zip_map(&self, other: &Self, op: &'static str, f: impl Fn(S, S) -> S) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::shape(op, &self.shape, &other.shape));
        }
        Ok(Self {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, "sub", |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, "mul", |a, b| a * b)
    }

    pub fn scale(&self, k: S) -> Self {
        self.map(|v| v * k)
    }

    /// Adds `other` into `self` in place.
    pub fn accumulate(&mut self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::shape("accumulate", &self.shape, &other.shape));
        }
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    /// Left-to-right sum of all entries.
    pub fn sum_all(&self) -> S {
        self.data.iter().fold(S::zero(), |acc, &v| acc + v)
    }

    pub fn dot(&self, other: &Self) -> Result<S> {
        if self.shape != other.shape {
            return Err(Error::shape("dot", &self.shape, &other.shape));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(S::zero(), |acc, (&a, &b)| acc + a * b))
    }

    pub fn norm(&self) -> S {
        self.data.iter().fold(S::zero(), |acc, &v| acc + v * v).sqrt()
    }

    fn require_matrix(&self, op: &'static str) -> Result<(usize, usize)> {
        if self.shape.len() != 2 {
            return Err(Error::InvalidShape(format!(
                "{op} expects a matrix, got shape {:?}",
                self.shape
            )));
        }
        Ok((self.shape[0], self.shape[1]))
    }

    /// Matrix product `self · other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        let (m, k) = self.require_matrix("matmul")?;
        let (k2, n) = other.require_matrix("matmul")?;
        if k != k2 {
            return Err(Error::shape("matmul", &self.shape, &other.shape));
        }
        let mut out = vec![S::zero(); m * n];
        for i in 0..m {
            let a_row = &self.data[i * k..(i + 1) * k];
            let o_row = &mut out[i * n..(i + 1) * n];
            for (p, &a) in a_row.iter().enumerate() {
                if a == S::zero() {
                    continue;
                }
                let b_row = &other.data[p * n..(p + 1) * n];
                for (o, &b) in o_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(Self {
            shape: vec![m, n],
            data: out,
        })
    }

    pub fn transpose(&self) -> Result<Self> {
        let (m, n) = self.require_matrix("transpose")?;
        let mut out = vec![S::zero(); m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = self.data[i * n + j];
            }
        }
        Ok(Self {
            shape: vec![n, m],
            data: out,
        })
    }

    /// Concatenates tensors along `axis`; all other extents must agree.
    pub fn concat(parts: &[&Self], axis: usize) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("concat of zero tensors".into()))?;
        let rank = first.rank();
        if axis >= rank {
            return Err(Error::InvalidArgument(format!(
                "concat axis {axis} out of range for rank {rank}"
            )));
        }
        let mut shape = first.shape.clone();
        shape[axis] = 0;
        for p in parts {
            let compatible = p.rank() == rank
                && p.shape
                    .iter()
                    .zip(&first.shape)
                    .enumerate()
                    .all(|(d, (a, b))| d == axis || a == b);
            if !compatible {
                return Err(Error::shape("concat", &first.shape, &p.shape));
            }
            shape[axis] += p.shape[axis];
        }
        let outer = numel(&shape[..axis]);
        let inner = numel(&shape[axis + 1..]);
        let mut data = Vec::with_capacity(numel(&shape));
        for o in 0..outer {
            for p in parts {
                let chunk = p.shape[axis] * inner;
                data.extend_from_slice(&p.data[o * chunk..(o + 1) * chunk]);
            }
        }
        Self::new(shape, data)
    }

    /// Sub-range along `axis`.
    pub fn slice(&self, axis: usize, range: Range<usize>) -> Result<Self> {
        if axis >= self.rank() || range.start > range.end || range.end > self.shape[axis] {
            return Err(Error::InvalidArgument(format!(
                "slice {range:?} on axis {axis} of shape {:?}",
                self.shape
            )));
        }
        let outer = numel(&self.shape[..axis]);
        let inner = numel(&self.shape[axis + 1..]);
        let extent = self.shape[axis];
        let mut data = Vec::with_capacity(outer * range.len() * inner);
        for o in 0..outer {
            let base = o * extent * inner;
            data.extend_from_slice(&self.data[base + range.start * inner..base + range.end * inner]);
        }
        let mut shape = self.shape.clone();
        shape[axis] = range.len();
        Self::new(shape, data)
    }

    /// Writes `src` into the sub-range of `self` along `axis`, adding to the
    /// existing entries.
    pub(crate) fn add_into_slice(&mut self, axis: usize, start: usize, src: &Self) {
        let outer = numel(&self.shape[..axis]);
        let inner = numel(&self.shape[axis + 1..]);
        let extent = self.shape[axis];
        let len = src.shape[axis];
        for o in 0..outer {
            let dst = o * extent * inner + start * inner;
            let from = o * len * inner;
            for k in 0..len * inner {
                self.data[dst + k] += src.data[from + k];
            }
        }
    }

    /// Broadcasts to `shape` using trailing-aligned extents; a source extent
    /// must equal the target extent or be 1.
    pub fn broadcast_to(&self, shape: &[usize]) -> Result<Self> {
        let strides = self.broadcast_strides(shape)?;
        let total = numel(shape);
        let mut data = Vec::with_capacity(total);
        let mut index = vec![0usize; shape.len()];
        for _ in 0..total {
            let src: usize = index.iter().zip(&strides).map(|(i, s)| i * s).sum();
            data.push(self.data[src]);
            increment(&mut index, shape);
        }
        Self::new(shape.to_vec(), data)
    }

    /// Adjoint of [`broadcast_to`](Self::broadcast_to): sums a tensor of the
    /// broadcast shape back down to `shape`.
    pub fn reduce_to(&self, shape: &[usize]) -> Result<Self> {
        let target = Self::zeros(shape);
        let strides = target.broadcast_strides(&self.shape)?;
        let mut out = target.data;
        let mut index = vec![0usize; self.shape.len()];
        for &v in &self.data {
            let dst: usize = index.iter().zip(&strides).map(|(i, s)| i * s).sum();
            out[dst] += v;
            increment(&mut index, &self.shape);
        }
        Self::new(shape.to_vec(), out)
    }

    /// Per-dimension source strides for broadcasting into `shape`, with zero
    /// stride on broadcast dimensions.
    fn broadcast_strides(&self, shape: &[usize]) -> Result<Vec<usize>> {
        if self.rank() > shape.len() {
            return Err(Error::shape("broadcast", &self.shape, shape));
        }
        let offset = shape.len() - self.rank();
        let mut own = vec![0usize; self.rank()];
        let mut acc = 1;
        for d in (0..self.rank()).rev() {
            own[d] = acc;
            acc *= self.shape[d];
        }
        let mut strides = vec![0usize; shape.len()];
        for d in 0..self.rank() {
            let (src, dst) = (self.shape[d], shape[d + offset]);
            if src == dst {
                strides[d + offset] = own[d];
            } else if src != 1 {
                return Err(Error::shape("broadcast", &self.shape, shape));
            }
        }
        Ok(strides)
    }

    /// Converts every entry to another scalar type.
    pub fn cast<T: Real>(&self) -> Tensor<T> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| T::lit(v.to_f64_lossy())).collect(),
        }
    }
}

fn increment(index: &mut [usize], shape: &[usize]) {
    for d in (0..shape.len()).rev() {
        index[d] += 1;
        if index[d] < shape[d] {
            return;
        }
        index[d] = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor<f64> {
        let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        Tensor::matrix(rows, cols, data).unwrap()
    }

    #[test]
    fn identity_matmul_is_identity() {
        let a = Tensor::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(Tensor::eye(2).matmul(&a).unwrap(), a);
    }

    #[test]
    fn projection_matmul() {
        let p = Tensor::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap();
        let v = Tensor::from_rows(&[[5.0], [7.0]]).unwrap();
        let got = p.matmul(&v).unwrap();
        assert_eq!(got.data(), &[5.0, 0.0]);
        assert_eq!(got.shape(), &[2, 1]);
    }

    #[test]
    fn matmul_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random(&mut rng, 3, 4);
        let b = random(&mut rng, 4, 2);
        let got = a.matmul(&b).unwrap();
        for i in 0..3 {
            for j in 0..2 {
                let mut acc = 0.0;
                for k in 0..4 {
                    acc += a.at(i, k) * b.at(k, j);
                }
                assert_eq!(got.at(i, j), acc);
            }
        }
    }

    #[test]
    fn matmul_rejects_inner_mismatch() {
        let a = Tensor::<f64>::zeros(&[2, 3]);
        assert!(matches!(a.matmul(&a), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn constructor_checks_length() {
        assert!(Tensor::<f64>::new(vec![2, 2], vec![1.0; 3]).is_err());
        assert_eq!(Tensor::<f64>::new(vec![], vec![2.0]).unwrap().item().unwrap(), 2.0);
    }

    #[test]
    fn broadcast_and_reduce_are_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random(&mut rng, 1, 3);
        let y = random(&mut rng, 4, 3);
        let bx = x.broadcast_to(&[4, 3]).unwrap();
        let ry = y.reduce_to(&[1, 3]).unwrap();
        let lhs = bx.dot(&y).unwrap();
        let rhs = x.dot(&ry).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);

        let col = Tensor::vector(vec![1.0, 2.0]).reshape(vec![2, 1]).unwrap();
        let wide = col.broadcast_to(&[2, 3]).unwrap();
        assert_eq!(wide.data(), &[1.0, 1.0, 1.0, 2.0, 2.0, 2.0]);
        let s = Tensor::scalar(5.0).broadcast_to(&[2, 2]).unwrap();
        assert_eq!(s.data(), &[5.0; 4]);
        assert!(col.broadcast_to(&[3, 3]).is_err());
    }

    #[test]
    fn concat_then_slice_recovers_parts() {
        let a = Tensor::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let b = Tensor::from_rows(&[[5.0], [6.0]]).unwrap();
        let c = Tensor::concat(&[&a, &b], 1).unwrap();
        assert_eq!(c.data(), &[1.0, 2.0, 5.0, 3.0, 4.0, 6.0]);
        assert_eq!(c.slice(1, 0..2).unwrap(), a);
        assert_eq!(c.slice(1, 2..3).unwrap(), b);
        let r = Tensor::concat(&[&a, &a], 0).unwrap();
        assert_eq!(r.shape(), &[4, 2]);
        assert_eq!(r.slice(0, 2..4).unwrap(), a);
    }
}
