//! Run directories: metrics CSV, event log, checkpoints, summaries, the
//! ablation grid, and SVG plots.

mod gradcheck;
mod plot;
mod runner;

pub use gradcheck::{central_differences, run_gradcheck, GradcheckReport, SuiteResult};
pub use plot::{line_plot_svg, scatter_svg, Series};
pub use runner::{
    run_ablation, run_distill, thread_budget, ExperimentConfig, RunSummary, CONFIG_FILE, EVENTS_FILE, METRICS_FILE,
    SUMMARY_FILE, THREADS_ENV,
};
