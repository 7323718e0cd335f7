//! Synthetic generative substrate: mixture targets with closed-form scores,
//! the forward process, `x0`-predicting networks, and condition units.

mod mixture;
mod network;
mod noise;
mod vcu;

pub use mixture::{GaussianMixture, TargetSpec, FRAME_DIM};
pub use network::{
    denoising_loss, generator_rollout, rollout_tensors, score_from_prediction, Denoiser, Rollout, RolloutStep,
};
pub use noise::{
    add_noise, add_noise_batch, denoiser_to_score, standard_normal, time_embedding, NoiseSchedule, NoisySample,
    TIME_EMBED_WIDTH,
};
pub use vcu::{build_vcu, condition_width, encode_condition, Task, Vcu, VcuInput};
