use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trainer::{AblationRow, Evaluation, MetricsRow, TrainConfig, Trainer, ZeroForcingReport, CSV_HEADER};

pub const METRICS_FILE: &str = "metrics.csv";
pub const EVENTS_FILE: &str = "events.log";
pub const CONFIG_FILE: &str = "config.json";
pub const SUMMARY_FILE: &str = "summary.json";
/// Caps the worker threads of [`run_ablation`].
pub const THREADS_ENV: &str = "OTDLAB_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub train: TrainConfig,
    /// Save weights every this many steps; 0 keeps only the final set.
    pub checkpoint_every: usize,
    /// Fill the `w2` and `mode_coverage` columns every this many steps and
    /// on the last step; 0 evaluates only at the end.
    pub eval_every: usize,
    pub eval_samples: usize,
    /// Fill the `wall_ms` column. Off by default so repeated runs produce
    /// identical files.
    pub record_wall_ms: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            checkpoint_every: 0,
            eval_every: 500,
            eval_samples: 256,
            record_wall_ms: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.eval_samples == 0 || self.eval_samples > crate::trainer::MAX_EVAL_SAMPLES {
            return Err(Error::Config(format!(
                "eval_samples must be in 1..={}, got {}",
                crate::trainer::MAX_EVAL_SAMPLES,
                self.eval_samples
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub steps: usize,
    pub final_eval: Evaluation,
    pub zero_forcing: ZeroForcingReport,
    pub stale_transport_steps: usize,
    pub generator_updates: usize,
    pub fake_updates: usize,
    pub critic_updates: usize,
}

struct RunFiles {
    metrics: BufWriter<File>,
    events: BufWriter<File>,
}

impl RunFiles {
    fn create(out: &Path) -> Result<Self> {
        let mut metrics = BufWriter::new(File::create(out.join(METRICS_FILE))?);
        writeln!(metrics, "{CSV_HEADER}")?;
        Ok(Self {
            metrics,
            events: BufWriter::new(File::create(out.join(EVENTS_FILE))?),
        })
    }

    fn drain(&mut self, tr: &mut Trainer, stale: &mut usize) -> Result<()> {
        for e in tr.drain_events() {
            if e.kind == "stale_transport_gradient" {
                *stale += 1;
            }
            writeln!(self.events, "{}", serde_json::to_string(&e)?)?;
        }
        Ok(())
    }

    fn flush(&mut self) -> Result<()> {
        self.metrics.flush()?;
        self.events.flush()?;
        Ok(())
    }
}

/// Trains from scratch into `out`, calling `progress` after every step.
///
/// A failed step is rolled back by the trainer; the files written so far are
/// flushed, the incident is in the event log, and the error is returned.
pub fn run_distill(
    cfg: &ExperimentConfig,
    out: &Path,
    mut progress: impl FnMut(&MetricsRow),
) -> Result<RunSummary> {
    cfg.validate()?;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join(CONFIG_FILE), serde_json::to_string_pretty(cfg)?)?;
    let mut tr = Trainer::new(cfg.train.clone())?;
    let mut files = RunFiles::create(out)?;
    let mut stale = 0;
    let total = cfg.train.total_steps();
    let start = Instant::now();
    while !tr.finished() {
        let mut row = match tr.train_step() {
            Ok(row) => row,
            Err(e) => {
                files.drain(&mut tr, &mut stale)?;
                files.flush()?;
                return Err(e);
            }
        };
        let done = row.step + 1;
        if done == total || (cfg.eval_every > 0 && done % cfg.eval_every == 0) {
            let ev = tr.evaluate(cfg.eval_samples)?;
            row.w2 = Some(ev.w2);
            row.mode_coverage = Some(ev.mode_coverage);
        }
        if cfg.record_wall_ms {
            row.wall_ms = Some(start.elapsed().as_secs_f64() * 1e3);
        }
        writeln!(files.metrics, "{}", row.to_csv_line())?;
        files.drain(&mut tr, &mut stale)?;
        if cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 && done != total {
            tr.save_weights(&out.join("checkpoints").join(format!("step_{done:06}")))?;
        }
        progress(&row);
    }
    tr.save_weights(&out.join("checkpoints").join("final"))?;
    files.flush()?;
    let s = tr.state();
    let summary = RunSummary {
        steps: s.step,
        final_eval: tr.evaluate(cfg.eval_samples)?,
        zero_forcing: tr.zero_forcing_diagnostic(cfg.eval_samples)?,
        stale_transport_steps: stale,
        generator_updates: s.generator_updates,
        fake_updates: s.fake_updates,
        critic_updates: s.critic_updates,
    };
    std::fs::write(out.join(SUMMARY_FILE), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

/// Worker threads for parallel runs: `OTDLAB_THREADS` if set, else the
/// available parallelism.
pub fn thread_budget() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Runs each ablation row into `out/row_<label>` in parallel. Rows are
/// independent seeded runs, so the results do not depend on scheduling.
pub fn run_ablation(
    cfg: &ExperimentConfig,
    out: &Path,
    rows: &[AblationRow],
    threads: usize,
) -> Result<Vec<(AblationRow, PathBuf, RunSummary)>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| {
        rows.par_iter()
            .map(|&row| {
                let dir = out.join(format!("row_{}", row.label()));
                let run = ExperimentConfig {
                    train: row.apply(&cfg.train),
                    ..cfg.clone()
                };
                let summary = run_distill(&run, &dir, |_| {})?;
                Ok((row, dir, summary))
            })
            .collect()
    })
}
