//! Tape-based reverse-mode differentiation over [`Tensor`] values.
//!
//! Every operation appends a node holding its forward value and the indices
//! of its parents, so the tape is a DAG stored in topological order. Leaves
//! come in two flavours: trainable leaves, which receive gradients, and
//! constants, which are detached by construction. Stop-gradient is therefore
//! expressed by handing a plain [`Tensor`] to [`Graph::constant`]; a [`Var`]
//! can only become a constant through [`Graph::detach`], which copies its
//! value and drops the connection.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;
use crate::scalar::Real;

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Primitive operation recorded on the tape.
#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    Leaf,
    Constant,
    Add,
    Sub,
    Mul,
    MatMul,
    Tanh,
    Exp,
    Log,
    Sum,
    Mean,
    Square,
    Concat { axis: usize },
    Slice { axis: usize, start: usize, end: usize },
    Broadcast { shape: Vec<usize> },
}

#[derive(Debug, Clone)]
struct Node<S> {
    op: Op,
    parents: Vec<usize>,
    value: Tensor<S>,
}

#[derive(Debug, Clone, Default)]
pub struct Graph<S> {
    nodes: Vec<Node<S>>,
}

fn eval<S: Real>(op: &Op, inputs: &[&Tensor<S>]) -> Result<Tensor<S>> {
    let out = match op {
        Op::Leaf | Op::Constant => unreachable!("leaves are not evaluated"),
        Op::Add => inputs[0].add(inputs[1])?,
        Op::Sub => inputs[0].sub(inputs[1])?,
        Op::Mul => inputs[0].mul(inputs[1])?,
        Op::MatMul => inputs[0].matmul(inputs[1])?,
        Op::Tanh => inputs[0].map(S::tanh),
        Op::Exp => inputs[0].map(S::exp),
        Op::Log => inputs[0].map(S::ln),
        Op::Sum => Tensor::scalar(inputs[0].sum_all()),
        Op::Mean => {
            let x = inputs[0];
            if x.numel() == 0 {
                return Err(Error::InvalidArgument("mean of an empty tensor".into()));
            }
            Tensor::scalar(x.sum_all() / S::from_count(x.numel()))
        }
        Op::Square => inputs[0].map(|v| v * v),
        Op::Concat { axis } => Tensor::concat(inputs, *axis)?,
        Op::Slice { axis, start, end } => inputs[0].slice(*axis, *start..*end)?,
        Op::Broadcast { shape } => inputs[0].broadcast_to(shape)?,
    };
    out.ensure_finite(op_name(op))
}

fn op_name(op: &Op) -> &'static str {
    match op {
        Op::Leaf => "leaf",
        Op::Constant => "constant",
        Op::Add => "add",
        Op::Sub => "sub",
        Op::Mul => "mul",
        Op::MatMul => "matmul",
        Op::Tanh => "tanh",
        Op::Exp => "exp",
        Op::Log => "log",
        Op::Sum => "sum",
        Op::Mean => "mean",
        Op::Square => "square",
        Op::Concat { .. } => "concat",
        Op::Slice { .. } => "slice",
        Op::Broadcast { .. } => "broadcast",
    }
}

impl<S: Real> Graph<S> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Trainable input.
    pub fn leaf(&mut self, value: Tensor<S>) -> Var {
        self.push(Op::Leaf, Vec::new(), value)
    }

    /// Input that never receives a gradient.
    pub fn constant(&mut self, value: Tensor<S>) -> Var {
        self.push(Op::Constant, Vec::new(), value)
    }

    /// Stop-gradient: a constant copy of `v`'s current value.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.value(v).clone();
        self.constant(value)
    }

    pub fn value(&self, v: Var) -> &Tensor<S> {
        &self.nodes[v.0].value
    }

    pub fn op(&self, v: Var) -> &Op {
        &self.nodes[v.0].op
    }

    pub fn is_leaf(&self, v: Var) -> bool {
        self.nodes[v.0].op == Op::Leaf
    }

    fn push(&mut self, op: Op, parents: Vec<usize>, value: Tensor<S>) -> Var {
        self.nodes.push(Node { op, parents, value });
        Var(self.nodes.len() - 1)
    }

    fn apply(&mut self, op: Op, parents: &[Var]) -> Result<Var> {
        let inputs: Vec<&Tensor<S>> = parents.iter().map(|p| &self.nodes[p.0].value).collect();
        let value = eval(&op, &inputs)?;
        Ok(self.push(op, parents.iter().map(|p| p.0).collect(), value))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Op::Add, &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Op::Sub, &[a, b])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Op::Mul, &[a, b])
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Op::MatMul, &[a, b])
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.apply(Op::Tanh, &[a])
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.apply(Op::Exp, &[a])
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.apply(Op::Log, &[a])
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.apply(Op::Sum, &[a])
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        self.apply(Op::Mean, &[a])
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.apply(Op::Square, &[a])
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        self.apply(Op::Concat { axis }, parts)
    }

    pub fn slice(&mut self, a: Var, axis: usize, range: Range<usize>) -> Result<Var> {
        self.apply(
            Op::Slice {
                axis,
                start: range.start,
                end: range.end,
            },
            &[a],
        )
    }

    pub fn broadcast(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        self.apply(
            Op::Broadcast {
                shape: shape.to_vec(),
            },
            &[a],
        )
    }

    /// `a + b` with `b` broadcast to the shape of `a`.
    pub fn add_broadcast(&mut self, a: Var, b: Var) -> Result<Var> {
        let shape = self.value(a).shape().to_vec();
        if self.value(b).shape() == shape.as_slice() {
            return self.add(a, b);
        }
        let wide = self.broadcast(b, &shape)?;
        self.add(a, wide)
    }

    /// `a * b` with `b` broadcast to the shape of `a`.
    pub fn mul_broadcast(&mut self, a: Var, b: Var) -> Result<Var> {
        let shape = self.value(a).shape().to_vec();
        if self.value(b).shape() == shape.as_slice() {
            return self.mul(a, b);
        }
        let wide = self.broadcast(b, &shape)?;
        self.mul(a, wide)
    }

    /// Multiplies by a fixed scalar.
    pub fn scale(&mut self, a: Var, k: S) -> Result<Var> {
        let c = self.constant(Tensor::scalar(k));
        self.mul_broadcast(a, c)
    }

    /// Reverse sweep from a scalar output.
    pub fn backward(&self, output: Var) -> Result<Gradients<S>> {
        let shape = self.value(output).shape().to_vec();
        if self.value(output).numel() != 1 {
            return Err(Error::NotScalar(shape));
        }
        self.backward_with_seed(output, Tensor::ones(&shape))
    }

    /// Reverse sweep seeded with an arbitrary cotangent of the output's shape;
    /// the resulting leaf gradients are the vector-Jacobian product.
    pub fn backward_with_seed(&self, output: Var, seed: Tensor<S>) -> Result<Gradients<S>> {
        if seed.shape() != self.value(output).shape() {
            return Err(Error::shape("backward seed", seed.shape(), self.value(output).shape()));
        }
        let mut grads: Vec<Option<Tensor<S>>> = vec![None; output.0 + 1];
        grads[output.0] = Some(seed);

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            if !g.is_finite() {
                return Err(Error::NonFinite(format!(
                    "reverse sweep at node {idx} ({})",
                    op_name(&self.nodes[idx].op)
                )));
            }
            let node = &self.nodes[idx];
            let contributions = self.local_grads(node, &g)?;
            for (&p, c) in node.parents.iter().zip(contributions) {
                match &mut grads[p] {
                    Some(acc) => acc.accumulate(&c)?,
                    slot @ None => *slot = Some(c),
                }
            }
            grads[idx] = Some(g);
        }
        grads.resize(self.nodes.len(), None);
        Ok(Gradients { grads })
    }

    fn local_grads(&self, node: &Node<S>, g: &Tensor<S>) -> Result<Vec<Tensor<S>>> {
        let input = |k: usize| &self.nodes[node.parents[k]].value;
        let out = &node.value;
        Ok(match &node.op {
            Op::Leaf | Op::Constant => Vec::new(),
            Op::Add => vec![g.clone(), g.clone()],
            Op::Sub => vec![g.clone(), g.map(|v| -v)],
            Op::Mul => vec![g.mul(input(1))?, g.mul(input(0))?],
            Op::MatMul => vec![
                g.matmul(&input(1).transpose()?)?,
                input(0).transpose()?.matmul(g)?,
            ],
            Op::Tanh => vec![g.zip_map(out, "tanh'", |gv, y| gv * (S::one() - y * y))?],
            Op::Exp => vec![g.mul(out)?],
            Op::Log => vec![g.zip_map(input(0), "log'", |gv, x| gv / x)?],
            Op::Sum => {
                let gv = g.item()?;
                vec![Tensor::full(input(0).shape(), gv)]
            }
            Op::Mean => {
                let x = input(0);
                let gv = g.item()? / S::from_count(x.numel());
                vec![Tensor::full(x.shape(), gv)]
            }
            Op::Square => {
                let two = S::lit(2.0);
                vec![g.zip_map(input(0), "square'", |gv, x| two * x * gv)?]
            }
            Op::Concat { axis } => {
                let mut start = 0;
                let mut parts = Vec::with_capacity(node.parents.len());
                for k in 0..node.parents.len() {
                    let len = input(k).shape()[*axis];
                    parts.push(g.slice(*axis, start..start + len)?);
                    start += len;
                }
                parts
            }
            Op::Slice { axis, start, .. } => {
                let mut full = Tensor::zeros(input(0).shape());
                full.add_into_slice(*axis, *start, g);
                vec![full]
            }
            Op::Broadcast { .. } => vec![g.reduce_to(input(0).shape())?],
        })
    }

    /// Recomputes every node from the leaves, with optional replacement leaf
    /// values, and returns all node values in tape order.
    pub fn replay(&self, overrides: &[(Var, Tensor<S>)]) -> Result<Vec<Tensor<S>>> {
        let mut values: Vec<Tensor<S>> = Vec::with_capacity(self.nodes.len());
        for (idx, node) in self.nodes.iter().enumerate() {
            let v = match node.op {
                Op::Leaf | Op::Constant => {
                    match overrides.iter().find(|(var, _)| var.0 == idx) {
                        Some((_, t)) => {
                            if t.shape() != node.value.shape() {
                                return Err(Error::shape("replay", t.shape(), node.value.shape()));
                            }
                            t.clone()
                        }
                        None => node.value.clone(),
                    }
                }
                _ => {
                    let inputs: Vec<&Tensor<S>> = node.parents.iter().map(|&p| &values[p]).collect();
                    eval(&node.op, &inputs)?
                }
            };
            values.push(v);
        }
        Ok(values)
    }

    /// Value of `output` after replaying with replaced leaves.
    pub fn replay_output(&self, output: Var, overrides: &[(Var, Tensor<S>)]) -> Result<Tensor<S>> {
        let mut values = self.replay(overrides)?;
        values.truncate(output.0 + 1);
        Ok(values.swap_remove(output.0))
    }
}

/// Result of a reverse sweep.
#[derive(Debug, Clone)]
pub struct Gradients<S> {
    grads: Vec<Option<Tensor<S>>>,
}

impl<S: Real> Gradients<S> {
    /// Gradient with respect to `v`, or zeros of `v`'s shape when the output
    /// does not depend on it.
    pub fn get(&self, graph: &Graph<S>, v: Var) -> Tensor<S> {
        match self.grads.get(v.0).and_then(Option::as_ref) {
            Some(g) => g.clone(),
            None => Tensor::zeros(graph.value(v).shape()),
        }
    }

    /// Whether any gradient reached `v`.
    pub fn touched(&self, v: Var) -> bool {
        self.grads.get(v.0).is_some_and(Option::is_some)
    }
}

/// Vector-Jacobian product `Jᵀ v` of a traced function at `x`.
///
/// Returns `(f(x), Jᵀ v)`.
pub fn vjp<S, F>(f: F, x: &Tensor<S>, v: &Tensor<S>) -> Result<(Tensor<S>, Tensor<S>)>
where
    S: Real,
    F: FnOnce(&mut Graph<S>, Var) -> Result<Var>,
{
    let mut g = Graph::new();
    let xv = g.leaf(x.clone());
    let out = f(&mut g, xv)?;
    if g.value(out).shape() != v.shape() {
        return Err(Error::shape("vjp", v.shape(), g.value(out).shape()));
    }
    let grads = g.backward_with_seed(out, v.clone())?;
    Ok((g.value(out).clone(), grads.get(&g, xv)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
    }

    /// Central finite differences of the scalar output with respect to `leaf`.
    fn finite_diff(g: &Graph<f64>, out: Var, leaf: Var, h: f64) -> Tensor<f64> {
        let base = g.value(leaf).clone();
        let mut grad = Tensor::zeros(base.shape());
        for k in 0..base.numel() {
            let mut plus = base.clone();
            plus.data_mut()[k] += h;
            let mut minus = base.clone();
            minus.data_mut()[k] -= h;
            let fp = g.replay_output(out, &[(leaf, plus)]).unwrap().item().unwrap();
            let fm = g.replay_output(out, &[(leaf, minus)]).unwrap().item().unwrap();
            grad.data_mut()[k] = (fp - fm) / (2.0 * h);
        }
        grad
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
    }

    #[test]
    fn square_at_three_has_gradient_six() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::scalar(3.0));
        let y = g.square(x).unwrap();
        let grads = g.backward(y).unwrap();
        assert_eq!(grads.get(&g, x).item().unwrap(), 6.0);
    }

    #[test]
    fn constant_output_gives_zero_gradient() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::scalar(3.0));
        let c = g.constant(Tensor::scalar(2.0));
        let grads = g.backward(c).unwrap();
        assert_eq!(grads.get(&g, x).item().unwrap(), 0.0);
        assert!(!grads.touched(x));
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::<f64>::zeros(&[2, 2]));
        assert!(matches!(g.backward(x), Err(Error::NotScalar(_))));
    }

    #[test]
    fn log_of_negative_is_reported() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::scalar(-1.0f64));
        assert!(matches!(g.log(x), Err(Error::NonFinite(_))));
    }

    #[test]
    fn sum_tanh_wx_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut g = Graph::new();
        let w = g.leaf(random(&mut rng, &[3, 4], -1.0, 1.0));
        let x = g.leaf(random(&mut rng, &[4, 1], -1.0, 1.0));
        let wx = g.matmul(w, x).unwrap();
        let t = g.tanh(wx).unwrap();
        let out = g.sum(t).unwrap();
        let grads = g.backward(out).unwrap();
        for leaf in [w, x] {
            let fd = finite_diff(&g, out, leaf, 1e-5);
            let an = grads.get(&g, leaf);
            for (a, b) in an.data().iter().zip(fd.data()) {
                assert!(rel_err(*a, *b) < 1e-6, "{a} vs {b}");
            }
        }
    }

    /// Every primitive is checked against central differences on 20 seeds.
    #[test]
    fn every_primitive_matches_finite_differences() {
        type Build = fn(&mut Graph<f64>, Var, Var) -> Var;
        let cases: Vec<(&str, Build)> = vec![
            ("add", |g, a, b| g.add(a, b).unwrap()),
            ("sub", |g, a, b| g.sub(a, b).unwrap()),
            ("mul", |g, a, b| g.mul(a, b).unwrap()),
            ("matmul", |g, a, b| {
                let bt = g.value(b).transpose().unwrap();
                let c = g.constant(bt);
                let p = g.matmul(a, c).unwrap();
                let q = g.matmul(b, c).unwrap();
                g.add(p, q).unwrap()
            }),
            ("tanh", |g, a, _| g.tanh(a).unwrap()),
            ("exp", |g, a, _| g.exp(a).unwrap()),
            ("log", |g, a, _| {
                let sq = g.square(a).unwrap();
                let one = g.constant(Tensor::ones(&[3, 4]));
                let shifted = g.add(sq, one).unwrap();
                g.log(shifted).unwrap()
            }),
            ("mean", |g, a, b| {
                let m = g.mul(a, b).unwrap();
                g.mean(m).unwrap()
            }),
            ("square", |g, a, _| g.square(a).unwrap()),
            ("concat", |g, a, b| g.concat(&[a, b], 1).unwrap()),
            ("concat0", |g, a, b| g.concat(&[a, b], 0).unwrap()),
            ("slice", |g, a, _| g.slice(a, 1, 1..3).unwrap()),
            ("broadcast", |g, a, _| {
                let row = g.slice(a, 0, 0..1).unwrap();
                g.broadcast(row, &[5, 4]).unwrap()
            }),
        ];
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            for (name, build) in &cases {
                let mut g = Graph::new();
                let a = g.leaf(random(&mut rng, &[3, 4], -1.5, 1.5));
                let b = g.leaf(random(&mut rng, &[3, 4], -1.5, 1.5));
                let y = build(&mut g, a, b);
                // Project onto a random direction so every output entry matters.
                let dir = random(&mut rng, g.value(y).shape(), -1.0, 1.0);
                let d = g.constant(dir);
                let p = g.mul(y, d).unwrap();
                let out = g.sum(p).unwrap();
                let grads = g.backward(out).unwrap();
                for leaf in [a, b] {
                    let fd = finite_diff(&g, out, leaf, 1e-5);
                    for (x, y) in grads.get(&g, leaf).data().iter().zip(fd.data()) {
                        assert!(rel_err(*x, *y) < 1e-5, "{name} seed {seed}: {x} vs {y}");
                    }
                }
            }
        }
    }

    #[test]
    fn vjp_of_identity_and_linear_map() {
        let x = Tensor::vector(vec![1.0, -2.0, 0.5]);
        let v = Tensor::vector(vec![0.3, 0.1, -4.0]);
        let (_, jv) = vjp(|_, x| Ok(x), &x, &v).unwrap();
        assert_eq!(jv, v);

        let a = Tensor::from_rows(&[[1.0, 2.0, 3.0], [0.0, -1.0, 4.0]]).unwrap();
        let xc = x.clone().reshape(vec![3, 1]).unwrap();
        let vc = Tensor::matrix(2, 1, vec![0.7, -1.1]).unwrap();
        let (_, jv) = vjp(
            |g, x| {
                let a = g.constant(a.clone());
                g.matmul(a, x)
            },
            &xc,
            &vc,
        )
        .unwrap();
        let expected = a.transpose().unwrap().matmul(&vc).unwrap();
        assert_eq!(jv, expected);
    }

    #[test]
    fn vjp_rejects_cotangent_shape_mismatch() {
        let x = Tensor::vector(vec![1.0, 2.0]);
        let v = Tensor::vector(vec![1.0, 2.0, 3.0]);
        assert!(matches!(vjp(|_, x| Ok(x), &x, &v), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn vjp_equals_backward_of_inner_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = random(&mut rng, &[4, 3], -1.0, 1.0);
        let x = random(&mut rng, &[2, 4], -1.0, 1.0);
        let v = random(&mut rng, &[2, 3], -1.0, 1.0);
        let net = |g: &mut Graph<f64>, x: Var| {
            let w = g.constant(w.clone());
            let h = g.matmul(x, w)?;
            g.tanh(h)
        };
        let (_, jv) = vjp(net, &x, &v).unwrap();

        let mut g = Graph::new();
        let xv = g.leaf(x.clone());
        let y = net(&mut g, xv).unwrap();
        let vc = g.constant(v.clone());
        let p = g.mul(y, vc).unwrap();
        let s = g.sum(p).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(&g, xv), jv);
    }

    #[test]
    fn vjp_matches_jacobian_assembled_from_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let w1 = random(&mut rng, &[3, 5], -1.0, 1.0);
        let w2 = random(&mut rng, &[5, 2], -1.0, 1.0);
        let net = |g: &mut Graph<f64>, x: Var| {
            let w1 = g.constant(w1.clone());
            let w2 = g.constant(w2.clone());
            let h = g.matmul(x, w1)?;
            let h = g.tanh(h)?;
            g.matmul(h, w2)
        };
        let x = random(&mut rng, &[1, 3], -1.0, 1.0);
        let v = random(&mut rng, &[1, 2], -1.0, 1.0);
        let (_, jv) = vjp(net, &x, &v).unwrap();

        // J[o][i] column by column.
        let h = 1e-6;
        let eval = |x: &Tensor<f64>| {
            let mut g = Graph::new();
            let xv = g.constant(x.clone());
            let out = net(&mut g, xv).unwrap();
            g.value(out).clone()
        };
        let mut expected = vec![0.0; 3];
        for i in 0..3 {
            let mut plus = x.clone();
            plus.data_mut()[i] += h;
            let mut minus = x.clone();
            minus.data_mut()[i] -= h;
            let col = eval(&plus).sub(&eval(&minus)).unwrap().scale(1.0 / (2.0 * h));
            expected[i] = col.dot(&v).unwrap();
        }
        for (a, b) in jv.data().iter().zip(&expected) {
            assert!(rel_err(*a, *b) < 1e-5, "{a} vs {b}");
        }
    }

    #[test]
    fn replay_is_bit_exact_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let build = |rng: &mut ChaCha8Rng| {
            let mut g = Graph::new();
            let a = g.leaf(random(rng, &[4, 3], -1.0, 1.0));
            let b = g.leaf(random(rng, &[3, 2], -1.0, 1.0));
            let m = g.matmul(a, b).unwrap();
            let t = g.tanh(m).unwrap();
            let e = g.exp(t).unwrap();
            let s = g.mean(e).unwrap();
            (g, s, a)
        };
        let (g, out, a) = build(&mut rng);
        let replayed = g.replay(&[]).unwrap();
        for (k, v) in replayed.iter().enumerate() {
            assert_eq!(v, g.value(Var(k)));
        }
        let mut rng2 = ChaCha8Rng::seed_from_u64(8);
        let (g2, out2, a2) = build(&mut rng2);
        let ga = g.backward(out).unwrap().get(&g, a);
        let gb = g2.backward(out2).unwrap().get(&g2, a2);
        assert_eq!(ga, gb);
    }

    #[test]
    fn detach_blocks_gradient_flow() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::scalar(2.0));
        let y = g.square(x).unwrap();
        let d = g.detach(y);
        let z = g.mul(d, x).unwrap();
        let grads = g.backward(z).unwrap();
        // d/dx [sg(x²)·x] = x² = 4
        assert_eq!(grads.get(&g, x).item().unwrap(), 4.0);
    }
}
