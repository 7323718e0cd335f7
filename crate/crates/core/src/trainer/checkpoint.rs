use std::path::Path;

use crate::error::{Error, Result};
use crate::gen::{Denoiser, TIME_EMBED_WIDTH};
use crate::nn::{CheckpointDoc, Mlp};
use crate::objectives::Discriminator;
use crate::trainer::config::TrainConfig;
use crate::trainer::state::Trainer;

pub const GENERATOR_FILE: &str = "generator.json";
pub const FAKE_SCORE_FILE: &str = "fake_score.json";
pub const DISCRIMINATOR_FILE: &str = "discriminator.json";

fn denoiser_from_doc(doc: CheckpointDoc, data_dim: usize, what: &str) -> Result<Denoiser<f64>> {
    let mlp = Mlp::from_checkpoint(doc)?;
    let cond = mlp
        .input_width()
        .checked_sub(data_dim + TIME_EMBED_WIDTH)
        .ok_or_else(|| Error::Checkpoint(format!("{what} input width {} is too small", mlp.input_width())))?;
    Denoiser::from_mlp(mlp, data_dim, cond)
}

impl Trainer {
    /// Writes the three trainable networks as JSON documents into `dir`.
    pub fn save_weights(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let s = self.state();
        s.generator.mlp().to_checkpoint().save(&dir.join(GENERATOR_FILE))?;
        s.fake.mlp().to_checkpoint().save(&dir.join(FAKE_SCORE_FILE))?;
        s.critic.to_checkpoint().save(&dir.join(DISCRIMINATOR_FILE))?;
        Ok(())
    }

    /// A trainer for `cfg` carrying the weights saved in `dir`. Optimizer
    /// state and step counters start fresh; the result is meant for
    /// evaluation.
    pub fn from_weights(cfg: TrainConfig, dir: &Path) -> Result<Self> {
        let mut tr = Trainer::new(cfg)?;
        let d = tr.config().data_dim();
        let generator = denoiser_from_doc(CheckpointDoc::load(&dir.join(GENERATOR_FILE))?, d, "generator")?;
        if generator.cond_dim() != 0 && generator.cond_dim() != tr.condition().cols() {
            return Err(Error::Checkpoint(format!(
                "generator expects a condition of width {}, config gives {}",
                generator.cond_dim(),
                tr.condition().cols()
            )));
        }
        let fake = denoiser_from_doc(CheckpointDoc::load(&dir.join(FAKE_SCORE_FILE))?, d, "fake score")?;
        if fake.cond_dim() != 0 {
            return Err(Error::Checkpoint("fake score network must be unconditional".into()));
        }
        let critic = Discriminator::from_checkpoint(CheckpointDoc::load(&dir.join(DISCRIMINATOR_FILE))?)?;
        critic.check_compatible(fake.mlp().widths())?;
        let s = tr.state_mut();
        s.generator = generator;
        s.fake = fake;
        s.critic = critic;
        Ok(tr)
    }
}
