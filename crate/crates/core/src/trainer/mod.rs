//! Training loop: configuration, the alternating objective schedule with
//! two-time-scale critic updates, evaluation, and metric rows.

mod checkpoint;
mod config;
mod eval;
mod metrics;
mod state;

pub use checkpoint::{DISCRIMINATOR_FILE, FAKE_SCORE_FILE, GENERATOR_FILE};
pub use config::{AblationRow, TrainConfig};
pub use eval::{
    collapse_steps, mode_coverage, mode_fractions, w2_distance, Evaluation, ZeroForcingReport, COVERAGE_SIGMAS,
    MAX_EVAL_SAMPLES,
};
pub use metrics::{parse_metrics_csv, Branch, MetricsRow, CSV_HEADER};
pub use state::{Event, TrainState, Trainer, FLOW_STEPS};
