//! JSON checkpoint documents.
//!
//! ```json
//! {"format_version": 1, "widths": [..], "activation": "tanh",
//!  "arrays": {"layer0.weight": [..], "layer0.bias": [..]}}
//! ```
//!
//! Arrays are row-major `f64` regardless of the in-memory scalar type.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::mlp::{Activation, Linear, Mlp};
use crate::nn::tensor::Tensor;
use crate::scalar::Real;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointDoc {
    pub format_version: u32,
    pub widths: Vec<usize>,
    pub activation: String,
    pub arrays: BTreeMap<String, Vec<f64>>,
    /// Hidden-layer indices read by a discriminator; absent for plain networks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taps: Option<Vec<usize>>,
}

impl CheckpointDoc {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CheckpointDoc = serde_json::from_str(text)?;
        if doc.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format_version {} (expected {FORMAT_VERSION})",
                doc.format_version
            )));
        }
        Ok(doc)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Removes and shapes one array.
    pub fn take_array<S: Real>(&mut self, name: &str, shape: &[usize]) -> Result<Tensor<S>> {
        let raw = self
            .arrays
            .remove(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing array {name:?}")))?;
        let expected: usize = shape.iter().product();
        if raw.len() != expected {
            return Err(Error::Checkpoint(format!(
                "array {name:?} has {} values, expected {expected}",
                raw.len()
            )));
        }
        Tensor::new(shape.to_vec(), raw.into_iter().map(S::lit).collect())
    }

    pub fn put_array<S: Real>(&mut self, name: String, t: &Tensor<S>) {
        self.arrays
            .insert(name, t.data().iter().map(|v| v.to_f64_lossy()).collect());
    }

    pub fn ensure_consumed(&self) -> Result<()> {
        match self.arrays.keys().next() {
            Some(extra) => Err(Error::Checkpoint(format!("unexpected array {extra:?}"))),
            None => Ok(()),
        }
    }
}

impl<S: Real> Mlp<S> {
    pub fn to_checkpoint(&self) -> CheckpointDoc {
        let mut doc = CheckpointDoc {
            format_version: FORMAT_VERSION,
            widths: self.widths().to_vec(),
            activation: self.activation().name().to_string(),
            arrays: BTreeMap::new(),
            taps: None,
        };
        for (k, l) in self.layers().iter().enumerate() {
            doc.put_array(format!("layer{k}.weight"), &l.weight);
            doc.put_array(format!("layer{k}.bias"), &l.bias);
        }
        doc
    }

    pub fn from_checkpoint(mut doc: CheckpointDoc) -> Result<Self> {
        let activation = Activation::parse(&doc.activation)?;
        let widths = doc.widths.clone();
        if widths.len() < 2 {
            return Err(Error::Checkpoint(format!("bad widths {widths:?}")));
        }
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for (k, w) in widths.windows(2).enumerate() {
            layers.push(Linear {
                weight: doc.take_array(&format!("layer{k}.weight"), &[w[0], w[1]])?,
                bias: doc.take_array(&format!("layer{k}.bias"), &[1, w[1]])?,
            });
        }
        doc.ensure_consumed()?;
        Mlp::from_layers(layers, activation)
    }
}
