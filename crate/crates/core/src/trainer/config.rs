use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gen::{NoiseSchedule, TargetSpec};
use crate::objectives::ObjectiveWeights;
use crate::ot::SinkhornConfig;

/// Everything that determines a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Distillation steps after any initialisation stage.
    pub max_step: usize,
    pub lr_generator: f64,
    pub lr_critic: f64,
    /// Critic updates per generator update.
    pub ttur_ratio: usize,
    pub batch_size: usize,
    /// Weight of the reverse-KL term next to the transport term.
    pub lambda_dmd: f64,
    pub ot_epsilon: f64,
    pub ot_tol: f64,
    pub ot_max_iter: usize,
    pub schedule: NoiseSchedule,
    pub target: TargetSpec,
    /// Frames per toy video; each frame is two-dimensional.
    pub frames: usize,
    pub prompt_dim: usize,
    pub seed: u64,
    pub enable_dmd: bool,
    pub enable_otd: bool,
    pub enable_gan: bool,
    /// Start the conditional generator from an unconditional one distilled
    /// for `acc_init_steps` reverse-KL steps.
    pub acc_init: bool,
    pub acc_init_steps: usize,
    /// Generator learning rate during the initialisation stage.
    pub init_lr: f64,
    pub grad_clip: f64,
    pub generator_hidden: Vec<usize>,
    pub fake_hidden: Vec<usize>,
    /// Zero-based hidden layers of the fake score network read by the critic.
    pub disc_taps: Vec<usize>,
    pub disc_proj: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_step: 5000,
            lr_generator: 1e-4,
            lr_critic: 1e-4,
            ttur_ratio: 5,
            batch_size: 64,
            lambda_dmd: 1.0,
            ot_epsilon: 0.05,
            ot_tol: 1e-9,
            ot_max_iter: 5000,
            schedule: NoiseSchedule::default(),
            target: TargetSpec::ring_default(),
            frames: 4,
            prompt_dim: 4,
            seed: 0,
            enable_dmd: true,
            enable_otd: true,
            enable_gan: true,
            acc_init: true,
            acc_init_steps: 1000,
            init_lr: 1e-3,
            grad_clip: 10.0,
            generator_hidden: vec![128, 128],
            fake_hidden: vec![64; 4],
            disc_taps: vec![1, 2, 3],
            disc_proj: 16,
        }
    }
}

impl TrainConfig {
    pub fn weights(&self) -> ObjectiveWeights {
        ObjectiveWeights {
            lambda_dmd: self.lambda_dmd,
            ot_epsilon: self.ot_epsilon,
        }
    }

    pub fn sinkhorn(&self) -> SinkhornConfig {
        SinkhornConfig {
            epsilon: self.ot_epsilon,
            tol: self.ot_tol,
            max_iter: self.ot_max_iter,
        }
    }

    pub fn data_dim(&self) -> usize {
        self.frames * crate::gen::FRAME_DIM
    }

    pub fn matching_enabled(&self) -> bool {
        self.enable_dmd || self.enable_otd
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        positive("lr_generator", self.lr_generator)?;
        positive("lr_critic", self.lr_critic)?;
        positive("init_lr", self.init_lr)?;
        positive("ot_tol", self.ot_tol)?;
        positive("grad_clip", self.grad_clip)?;
        self.weights().validate()?;
        self.target.validate()?;
        if self.ttur_ratio == 0 {
            return Err(Error::Config("ttur_ratio must be at least 1".into()));
        }
        if self.batch_size == 0 || self.frames == 0 || self.ot_max_iter == 0 || self.disc_proj == 0 {
            return Err(Error::Config(
                "batch_size, frames, ot_max_iter and disc_proj must be positive".into(),
            ));
        }
        let any_objective = self.matching_enabled() || self.enable_gan;
        if self.max_step == 0 && any_objective {
            return Err(Error::Config("max_step must be positive".into()));
        }
        if !any_objective && !self.acc_init {
            return Err(Error::Config("no objective enabled and no initialisation stage".into()));
        }
        if self.acc_init && self.acc_init_steps == 0 {
            return Err(Error::Config("acc_init_steps must be positive when acc_init is set".into()));
        }
        if self.generator_hidden.is_empty() || self.generator_hidden.contains(&0) {
            return Err(Error::Config("generator_hidden needs positive widths".into()));
        }
        if self.fake_hidden.is_empty() || self.fake_hidden.contains(&0) {
            return Err(Error::Config("fake_hidden needs positive widths".into()));
        }
        {
            let first = self.disc_taps.first().copied();
            let width = first.and_then(|k| self.fake_hidden.get(k)).copied();
            let ok = width.is_some()
                && self.disc_taps.windows(2).all(|w| w[0] < w[1])
                && self.disc_taps.iter().all(|&k| self.fake_hidden.get(k).copied() == width);
            if !ok {
                return Err(Error::Config(format!(
                    "disc_taps {:?} must be increasing hidden layers of equal width in {:?}",
                    self.disc_taps, self.fake_hidden
                )));
            }
        }
        Ok(())
    }

    /// Distillation steps plus the initialisation stage.
    pub fn total_steps(&self) -> usize {
        let stage2 = if self.matching_enabled() || self.enable_gan {
            self.max_step
        } else {
            0
        };
        stage2 + if self.acc_init { self.acc_init_steps } else { 0 }
    }
}

/// Rows of the objective ablation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AblationRow {
    #[serde(rename = "1")]
    InitOnly,
    #[serde(rename = "2")]
    DmdNoInit,
    #[serde(rename = "3")]
    DmdOtd,
    #[serde(rename = "4")]
    DmdGan,
    #[serde(rename = "5")]
    FullNoInit,
    #[serde(rename = "full")]
    Full,
}

impl AblationRow {
    pub const ALL: [AblationRow; 6] = [
        AblationRow::InitOnly,
        AblationRow::DmdNoInit,
        AblationRow::DmdOtd,
        AblationRow::DmdGan,
        AblationRow::FullNoInit,
        AblationRow::Full,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AblationRow::InitOnly => "1",
            AblationRow::DmdNoInit => "2",
            AblationRow::DmdOtd => "3",
            AblationRow::DmdGan => "4",
            AblationRow::FullNoInit => "5",
            AblationRow::Full => "full",
        }
    }

    /// `(dmd, otd, gan, acc_init)`.
    pub fn flags(self) -> (bool, bool, bool, bool) {
        match self {
            AblationRow::InitOnly => (false, false, false, true),
            AblationRow::DmdNoInit => (true, false, false, false),
            AblationRow::DmdOtd => (true, true, false, true),
            AblationRow::DmdGan => (true, false, true, true),
            AblationRow::FullNoInit => (true, true, true, false),
            AblationRow::Full => (true, true, true, true),
        }
    }

    pub fn apply(self, cfg: &TrainConfig) -> TrainConfig {
        let (dmd, otd, gan, init) = self.flags();
        TrainConfig {
            enable_dmd: dmd,
            enable_otd: otd,
            enable_gan: gan,
            acc_init: init,
            ..cfg.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = TrainConfig::default();
        cfg.validate().unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<TrainConfig>(&text).unwrap(), cfg);
        assert_eq!(cfg.total_steps(), 6000);
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = serde_json::from_str::<TrainConfig>(r#"{"max_stp": 3}"#).unwrap_err();
        assert!(err.to_string().contains("max_stp"), "{err}");
    }

    #[test]
    fn invalid_values_are_rejected() {
        let bad = [
            TrainConfig { lr_generator: 0.0, ..Default::default() },
            TrainConfig { ttur_ratio: 0, ..Default::default() },
            TrainConfig { max_step: 0, ..Default::default() },
            TrainConfig { lambda_dmd: -1.0, ..Default::default() },
            TrainConfig { ot_epsilon: 0.0, ..Default::default() },
            TrainConfig { disc_taps: vec![1, 4], ..Default::default() },
            TrainConfig {
                enable_dmd: false,
                enable_otd: false,
                enable_gan: false,
                acc_init: false,
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn ablation_rows_follow_the_grid() {
        let base = TrainConfig::default();
        let init_only = AblationRow::InitOnly.apply(&base);
        init_only.validate().unwrap();
        assert_eq!(init_only.total_steps(), base.acc_init_steps);
        assert_eq!(AblationRow::DmdNoInit.apply(&base).total_steps(), base.max_step);
        assert_eq!(AblationRow::Full.flags(), (true, true, true, true));
        assert_eq!(serde_json::to_string(&AblationRow::Full).unwrap(), "\"full\"");
        let labels: Vec<_> = AblationRow::ALL.iter().map(|r| r.label()).collect();
        assert_eq!(labels, ["1", "2", "3", "4", "5", "full"]);
    }
}
