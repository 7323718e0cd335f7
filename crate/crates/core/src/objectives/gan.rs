use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::gen::{time_embedding, TIME_EMBED_WIDTH};
use crate::nn::checkpoint::FORMAT_VERSION;
use crate::nn::{CheckpointDoc, Gradients, Graph, Linear, Parameters, Tensor, Var};
use crate::scalar::Real;

/// Linear critic on hidden activations of the fake score network: each
/// tapped layer is projected, the projections are concatenated with the
/// time embedding, and a bias-free linear head produces one logit.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator<S> {
    taps: Vec<usize>,
    projections: Vec<Linear<S>>,
    head: Tensor<S>,
}

/// Graph handles for a bound [`Discriminator`], aligned with its tensors.
#[derive(Debug, Clone)]
pub struct DiscriminatorVars {
    vars: Vec<Var>,
}

impl DiscriminatorVars {
    pub fn grads<S: Real>(&self, graph: &Graph<S>, grads: &Gradients<S>) -> Vec<Tensor<S>> {
        self.vars.iter().map(|&v| grads.get(graph, v)).collect()
    }
}

impl<S: Real> Discriminator<S> {
    /// Random projections from `tap_width` to `proj_dim` and a zero head.
    pub fn new<R: Rng + ?Sized>(taps: Vec<usize>, tap_width: usize, proj_dim: usize, rng: &mut R) -> Result<Self> {
        if taps.is_empty() || taps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(format!("taps must be non-empty and increasing, got {taps:?}")));
        }
        if tap_width == 0 || proj_dim == 0 {
            return Err(Error::InvalidShape("discriminator widths must be positive".into()));
        }
        let projections = taps.iter().map(|_| Linear::glorot(tap_width, proj_dim, rng)).collect();
        let head = Tensor::zeros(&[taps.len() * proj_dim + TIME_EMBED_WIDTH, 1]);
        Ok(Self {
            taps,
            projections,
            head,
        })
    }

    pub fn taps(&self) -> &[usize] {
        &self.taps
    }

    pub fn head(&self) -> &Tensor<S> {
        &self.head
    }

    pub fn head_mut(&mut self) -> &mut Tensor<S> {
        &mut self.head
    }

    pub fn tap_width(&self) -> usize {
        self.projections[0].fan_in()
    }

    pub fn proj_dim(&self) -> usize {
        self.projections[0].fan_out()
    }

    /// Checks that every tap indexes a hidden layer of a network with
    /// `widths`, and that the tapped widths match the projections.
    pub fn check_compatible(&self, widths: &[usize]) -> Result<()> {
        let hidden = &widths[1..widths.len().saturating_sub(1)];
        for &k in &self.taps {
            match hidden.get(k) {
                Some(&w) if w == self.tap_width() => {}
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "tap {k} does not match a hidden layer of width {} in {widths:?}",
                        self.tap_width()
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn bind(&self, graph: &mut Graph<S>, trainable: bool) -> DiscriminatorVars {
        let vars = self
            .tensors()
            .into_iter()
            .map(|t| {
                if trainable {
                    graph.leaf(t.clone())
                } else {
                    graph.constant(t.clone())
                }
            })
            .collect();
        DiscriminatorVars { vars }
    }

    /// Logits `B × 1` from the recorded hidden activations of the fake score
    /// network at a batch of noisy samples with times `t`.
    pub fn forward(&self, graph: &mut Graph<S>, vars: &DiscriminatorVars, hidden: &[Var], t: &[S]) -> Result<Var> {
        let mut parts = Vec::with_capacity(self.taps.len() + 1);
        for (j, &k) in self.taps.iter().enumerate() {
            let h = *hidden
                .get(k)
                .ok_or_else(|| Error::InvalidArgument(format!("missing activations for tap {k}")))?;
            let xw = graph.matmul(h, vars.vars[2 * j])?;
            parts.push(graph.add_broadcast(xw, vars.vars[2 * j + 1])?);
        }
        let b = graph.value(parts[0]).rows();
        if t.len() != b {
            return Err(Error::shape("discriminator times", &[t.len()], &[b]));
        }
        parts.push(graph.constant(time_embedding(t)));
        let features = graph.concat(&parts, 1)?;
        let head = *vars.vars.last().expect("head is bound last");
        graph.matmul(features, head)
    }

    pub fn to_checkpoint(&self) -> CheckpointDoc {
        let mut doc = CheckpointDoc {
            format_version: FORMAT_VERSION,
            widths: vec![self.tap_width(), self.proj_dim(), 1],
            activation: "linear".into(),
            arrays: BTreeMap::new(),
            taps: Some(self.taps.clone()),
        };
        for (j, p) in self.projections.iter().enumerate() {
            doc.put_array(format!("proj{j}.weight"), &p.weight);
            doc.put_array(format!("proj{j}.bias"), &p.bias);
        }
        doc.put_array("head.weight".into(), &self.head);
        doc
    }

    pub fn from_checkpoint(mut doc: CheckpointDoc) -> Result<Self> {
        let taps = doc
            .taps
            .clone()
            .ok_or_else(|| Error::Checkpoint("discriminator checkpoint has no taps".into()))?;
        let (tap_width, proj_dim) = match doc.widths[..] {
            [a, b, 1] => (a, b),
            _ => return Err(Error::Checkpoint(format!("bad discriminator widths {:?}", doc.widths))),
        };
        let mut projections = Vec::with_capacity(taps.len());
        for j in 0..taps.len() {
            projections.push(Linear {
                weight: doc.take_array(&format!("proj{j}.weight"), &[tap_width, proj_dim])?,
                bias: doc.take_array(&format!("proj{j}.bias"), &[1, proj_dim])?,
            });
        }
        let head = doc.take_array("head.weight", &[taps.len() * proj_dim + TIME_EMBED_WIDTH, 1])?;
        doc.ensure_consumed()?;
        Ok(Self {
            taps,
            projections,
            head,
        })
    }
}

impl<S: Real> Parameters<S> for Discriminator<S> {
    fn tensors(&self) -> Vec<&Tensor<S>> {
        let mut out: Vec<&Tensor<S>> = self.projections.iter().flat_map(|l| [&l.weight, &l.bias]).collect();
        out.push(&self.head);
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor<S>> {
        let mut out: Vec<&mut Tensor<S>> = self
            .projections
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect();
        out.push(&mut self.head);
        out
    }
}

fn check_pair<S>(a: &[S], b: &[S]) -> Result<()> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::shape("gan logits", &[a.len()], &[b.len()]));
    }
    Ok(())
}

/// Generator side: `mean(−(D(fake) − D(real)))`.
pub fn gan_loss_generator<S: Real>(fake: &[S], real: &[S]) -> Result<S> {
    check_pair(fake, real)?;
    let total: S = fake.iter().zip(real).map(|(&f, &r)| -(f - r)).sum();
    Ok(total / S::from_count(fake.len()))
}

/// Critic side: `mean(−(D(real) − D(fake)))`.
pub fn gan_loss_critic<S: Real>(real: &[S], fake: &[S]) -> Result<S> {
    check_pair(real, fake)?;
    let total: S = real.iter().zip(fake).map(|(&r, &f)| -(r - f)).sum();
    Ok(total / S::from_count(real.len()))
}

fn traced_relative<S: Real>(graph: &mut Graph<S>, low: Var, high: Var) -> Result<Var> {
    if graph.value(low).shape() != graph.value(high).shape() {
        return Err(Error::shape("gan logits", graph.value(low).shape(), graph.value(high).shape()));
    }
    let d = graph.sub(high, low)?;
    graph.mean(d)
}

/// Traced [`gan_loss_generator`] on logit nodes.
pub fn gan_loss_generator_traced<S: Real>(graph: &mut Graph<S>, fake: Var, real: Var) -> Result<Var> {
    traced_relative(graph, fake, real)
}

/// Traced [`gan_loss_critic`] on logit nodes.
pub fn gan_loss_critic_traced<S: Real>(graph: &mut Graph<S>, real: Var, fake: Var) -> Result<Var> {
    traced_relative(graph, real, fake)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::Denoiser;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn loss_examples() {
        assert_eq!(gan_loss_generator(&[0.3, 0.1], &[0.3, 0.1]).unwrap(), 0.0);
        assert_eq!(gan_loss_generator(&[0.0], &[1.0]).unwrap(), 1.0);
        assert_eq!(gan_loss_critic(&[1.0], &[0.0]).unwrap(), -1.0);
        assert!(gan_loss_generator(&[0.0, 1.0], &[1.0]).is_err());
        let base = gan_loss_generator(&[0.2, 0.5], &[0.1, 0.9]).unwrap();
        assert!(gan_loss_generator(&[0.2, 0.6], &[0.1, 0.9]).unwrap() < base);
        let fake = [0.25, -1.5, 3.0];
        let real = [0.5, 0.75, -2.0];
        assert_eq!(gan_loss_generator(&fake, &real).unwrap() + gan_loss_critic(&real, &fake).unwrap(), 0.0);
    }

    #[test]
    fn traced_losses_match() {
        let mut g = Graph::<f64>::new();
        let f = g.constant(Tensor::matrix(3, 1, vec![0.25, -1.5, 3.0]).unwrap());
        let r = g.constant(Tensor::matrix(3, 1, vec![0.5, 0.75, -2.0]).unwrap());
        let lg = gan_loss_generator_traced(&mut g, f, r).unwrap();
        let lc = gan_loss_critic_traced(&mut g, r, f).unwrap();
        let want = gan_loss_generator(&[0.25, -1.5, 3.0], &[0.5, 0.75, -2.0]).unwrap();
        assert!((g.value(lg).item().unwrap() - want).abs() < 1e-15);
        assert!((g.value(lc).item().unwrap() + want).abs() < 1e-15);
    }

    fn setup(seed: u64) -> (Denoiser<f64>, Discriminator<f64>, Tensor<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = Denoiser::new(2, 0, &[6, 6, 6, 6], &mut rng).unwrap();
        let disc = Discriminator::new(vec![1, 2, 3], 6, 3, &mut rng).unwrap();
        let x = crate::gen::standard_normal(5, 2, &mut rng);
        (net, disc, x, vec![0.2, 0.4, 0.5, 0.7, 1.0])
    }

    fn logits(net: &Denoiser<f64>, disc: &Discriminator<f64>, x: &Tensor<f64>, t: &[f64]) -> Tensor<f64> {
        let mut g = Graph::new();
        let nv = net.mlp().bind(&mut g, false);
        let dv = disc.bind(&mut g, false);
        let xv = g.constant(x.clone());
        let trace = net.forward(&mut g, &nv, xv, t, None).unwrap();
        let out = disc.forward(&mut g, &dv, &trace.hidden, t).unwrap();
        g.value(out).clone()
    }

    #[test]
    fn zero_head_and_linearity() {
        let (net, mut disc, x, t) = setup(1);
        disc.check_compatible(net.mlp().widths()).unwrap();
        assert!(logits(&net, &disc, &x, &t).data().iter().all(|&v| v == 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        *disc.head_mut() = crate::gen::standard_normal(disc.head().rows(), 1, &mut rng);
        let once = logits(&net, &disc, &x, &t);
        *disc.head_mut() = disc.head().scale(2.0);
        let twice = logits(&net, &disc, &x, &t);
        for (a, b) in once.data().iter().zip(twice.data()) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (net, mut disc, x, t) = setup(3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        *disc.head_mut() = crate::gen::standard_normal(disc.head().rows(), 1, &mut rng);
        let mut g = Graph::new();
        let nv = net.mlp().bind(&mut g, false);
        let dv = disc.bind(&mut g, true);
        let xv = g.constant(x);
        let trace = net.forward(&mut g, &nv, xv, &t, None).unwrap();
        let out = disc.forward(&mut g, &dv, &trace.hidden, &t).unwrap();
        let sq = g.square(out).unwrap();
        let loss = g.mean(sq).unwrap();
        let grads = g.backward(loss).unwrap();
        let h = 1e-5;
        for &p in &dv.vars {
            let base = g.value(p).clone();
            let an = grads.get(&g, p);
            for k in 0..base.numel() {
                let (mut up, mut dn) = (base.clone(), base.clone());
                up.data_mut()[k] += h;
                dn.data_mut()[k] -= h;
                let fu = g.replay_output(loss, &[(p, up)]).unwrap().item().unwrap();
                let fd = g.replay_output(loss, &[(p, dn)]).unwrap().item().unwrap();
                let num = (fu - fd) / (2.0 * h);
                let a = an.data()[k];
                assert!((num - a).abs() / num.abs().max(a.abs()).max(1e-4) < 1e-5, "{num} vs {a}");
            }
        }
    }

    #[test]
    fn checks_taps_and_round_trips() {
        let (net, disc, _, _) = setup(5);
        let bad = Discriminator::<f64>::new(vec![3, 4], 6, 3, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(bad.check_compatible(net.mlp().widths()).is_err());
        assert!(Discriminator::<f64>::new(vec![2, 1], 6, 3, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
        let doc = CheckpointDoc::from_json(&disc.to_checkpoint().to_json().unwrap()).unwrap();
        assert_eq!(Discriminator::from_checkpoint(doc).unwrap(), disc);
        let mut g = Graph::new();
        let dv = disc.bind(&mut g, false);
        assert!(disc.forward(&mut g, &dv, &[], &[0.5]).is_err());
    }
}
