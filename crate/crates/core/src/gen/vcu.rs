//! Video condition units: a prompt embedding, context frames, and per-frame
//! binary edit masks (`1` marks content to generate or edit).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    T2v,
    R2v,
    V2v,
    Mv2v,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::T2v, Task::R2v, Task::V2v, Task::Mv2v];
}

/// Task-specific inputs for [`build_vcu`]. Frames are per-frame vectors.
#[derive(Debug, Clone, PartialEq)]
pub enum VcuInput<S> {
    /// Generate `n` frames from the prompt alone.
    T2v { n: usize },
    /// Generate `n` frames after `refs` reference frames.
    R2v { refs: Vec<Vec<S>>, n: usize },
    /// Edit every given frame.
    V2v { frames: Vec<Vec<S>> },
    /// Edit the given frames where the masks are one.
    Mv2v { frames: Vec<Vec<S>>, masks: Vec<Vec<S>> },
}

impl<S> VcuInput<S> {
    pub fn task(&self) -> Task {
        match self {
            VcuInput::T2v { .. } => Task::T2v,
            VcuInput::R2v { .. } => Task::R2v,
            VcuInput::V2v { .. } => Task::V2v,
            VcuInput::Mv2v { .. } => Task::Mv2v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vcu<S> {
    prompt: Vec<S>,
    frames: Vec<Vec<S>>,
    masks: Vec<Vec<S>>,
}

impl<S: Real> Vcu<S> {
    /// Checks equal frame and mask counts, a shared per-frame extent, frame
    /// values in `[−1, 1]` and strictly binary masks.
    pub fn new(prompt: Vec<S>, frames: Vec<Vec<S>>, masks: Vec<Vec<S>>) -> Result<Self> {
        if frames.len() != masks.len() {
            return Err(Error::InvalidArgument(format!(
                "{} frames but {} masks",
                frames.len(),
                masks.len()
            )));
        }
        if prompt.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("vcu prompt".into()));
        }
        if let Some(first) = frames.first() {
            let d = first.len();
            for (i, (f, m)) in frames.iter().zip(&masks).enumerate() {
                if f.len() != d || m.len() != d {
                    return Err(Error::InvalidArgument(format!(
                        "frame {i} has extent {} and mask extent {}, expected {d}",
                        f.len(),
                        m.len()
                    )));
                }
                if f.iter().any(|&v| !(v >= -S::one() && v <= S::one())) {
                    return Err(Error::InvalidArgument(format!("frame {i} leaves [-1, 1]")));
                }
                if m.iter().any(|&v| v != S::zero() && v != S::one()) {
                    return Err(Error::InvalidArgument(format!("mask {i} is not binary")));
                }
            }
        }
        Ok(Self { prompt, frames, masks })
    }

    pub fn prompt(&self) -> &[S] {
        &self.prompt
    }

    pub fn frames(&self) -> &[Vec<S>] {
        &self.frames
    }

    pub fn masks(&self) -> &[Vec<S>] {
        &self.masks
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Lays out frames and masks for each task:
///
/// | task | frames | masks |
/// |------|--------|-------|
/// | t2v  | `0 × n` | `1 × n` |
/// | r2v  | `refs + 0 × n` | `0 × l + 1 × n` |
/// | v2v  | given | `1 × n` |
/// | mv2v | given | given |
pub fn build_vcu<S: Real>(prompt: Vec<S>, frame_dim: usize, input: VcuInput<S>) -> Result<Vcu<S>> {
    let zeros = |n: usize| vec![vec![S::zero(); frame_dim]; n];
    let ones = |n: usize| vec![vec![S::one(); frame_dim]; n];
    let check = |frames: &[Vec<S>]| -> Result<()> {
        match frames.iter().position(|f| f.len() != frame_dim) {
            Some(i) => Err(Error::InvalidArgument(format!(
                "frame {i} has extent {}, expected {frame_dim}",
                frames[i].len()
            ))),
            None => Ok(()),
        }
    };
    let (frames, masks) = match input {
        VcuInput::T2v { n } => (zeros(n), ones(n)),
        VcuInput::R2v { refs, n } => {
            check(&refs)?;
            let l = refs.len();
            let mut frames = refs;
            frames.extend(zeros(n));
            let mut masks = zeros(l);
            masks.extend(ones(n));
            (frames, masks)
        }
        VcuInput::V2v { frames } => {
            check(&frames)?;
            let n = frames.len();
            (frames, ones(n))
        }
        VcuInput::Mv2v { frames, masks } => {
            check(&frames)?;
            (frames, masks)
        }
    };
    Vcu::new(prompt, frames, masks)
}

/// `prompt ++ (u_i ⊙ (1 − m_i))_i ++ (m_i)_i`, frames in order.
pub fn encode_condition<S: Real>(v: &Vcu<S>) -> Vec<S> {
    let mut out = v.prompt.clone();
    for (f, m) in v.frames.iter().zip(&v.masks) {
        out.extend(f.iter().zip(m).map(|(&u, &k)| u * (S::one() - k)));
    }
    for m in &v.masks {
        out.extend_from_slice(m);
    }
    out
}

/// Length of [`encode_condition`]'s output.
pub fn condition_width(prompt_dim: usize, frames: usize, frame_dim: usize) -> usize {
    prompt_dim + 2 * frames * frame_dim
}
