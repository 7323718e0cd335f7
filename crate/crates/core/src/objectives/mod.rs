//! Distribution-matching objectives: reverse-KL score differences, the
//! entropic transport gradient between score clouds, and the relative GAN
//! pair with its feature-tap critic.

mod dmd;
mod gan;
mod otd;
mod scores;

pub use dmd::{dmd_loss, kl_gradient, otd_loss, stop_gradient_loss};
pub use gan::{
    gan_loss_critic, gan_loss_critic_traced, gan_loss_generator, gan_loss_generator_traced, Discriminator,
    DiscriminatorVars,
};
pub use otd::{otd_gradient, OtdGradient};
pub use scores::{DenoiserScore, ScoreBatch, ScoreFunction, ScoreSource};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weight of the reverse-KL term in `L_OTD + λ·L_DMD`, and the entropic
/// regularisation of the transport solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveWeights {
    pub lambda_dmd: f64,
    pub ot_epsilon: f64,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        Self {
            lambda_dmd: 1.0,
            ot_epsilon: 0.05,
        }
    }
}

impl ObjectiveWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_dmd >= 0.0) || !self.lambda_dmd.is_finite() {
            return Err(Error::Config(format!("lambda_dmd must be >= 0, got {}", self.lambda_dmd)));
        }
        if !(self.ot_epsilon > 0.0) || !self.ot_epsilon.is_finite() {
            return Err(Error::Config(format!("ot_epsilon must be > 0, got {}", self.ot_epsilon)));
        }
        Ok(())
    }
}
