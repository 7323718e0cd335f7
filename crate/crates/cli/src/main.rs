use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use otdlab::experiment::{
    line_plot_svg, run_ablation, run_distill, run_gradcheck, scatter_svg, thread_budget, ExperimentConfig, Series,
    CONFIG_FILE,
};
use otdlab::ot::{sinkhorn_log, CostMatrix, Marginals, SinkhornConfig};
use otdlab::trainer::{parse_metrics_csv, AblationRow, MetricsRow, Trainer};
use otdlab::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_NOT_CONVERGED: u8 = 4;
const SAMPLES_FILE: &str = "samples.csv";
const SAMPLES_HEADER: &str = "source,x,y";

#[derive(Parser)]
#[command(name = "otdlab", version, about = "Few-step distillation with transport-regularized score matching")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct RunArgs {
    /// Experiment config (JSON); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Override `train.max_step`.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotKind {
    Line,
    Scatter,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one entropic transport instance read from a JSON file ("-" for stdin).
    Sinkhorn {
        input: PathBuf,
        /// Write the solution here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the finite-difference gradient suites.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        instances: usize,
    },
    /// Train a generator and write metrics, events and checkpoints.
    Distill(RunArgs),
    /// Evaluate saved weights and dump samples for plotting.
    Eval {
        /// Directory holding the saved networks.
        checkpoint: PathBuf,
        /// Defaults to the config.json of the run the checkpoint belongs to.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 256)]
        samples: usize,
    },
    /// Run the ablation grid, one directory per row.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated row labels (1,2,3,4,5,full).
        #[arg(long, value_delimiter = ',')]
        rows: Option<Vec<String>>,
    },
    /// Render metrics CSVs (line) or a samples CSV (scatter) as SVG.
    Plot {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "line")]
        kind: PlotKind,
        /// Metrics column drawn by the line plot.
        #[arg(long, default_value = "w2")]
        metric: String,
        #[arg(long, default_value = "")]
        title: String,
    },
}

#[derive(Debug)]
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            kind: "config",
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::Config(_) | Error::Csv(_) | Error::Checkpoint(_) | Error::Io(_) | Error::Json(_) => {
                (EXIT_CONFIG, "config")
            }
            Error::NotConverged { .. } => (EXIT_NOT_CONVERGED, "not_converged"),
            _ => (EXIT_NUMERICAL, "numerical"),
        };
        Self {
            code,
            kind,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

type CliResult<T> = Result<T, Failure>;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SinkhornInput {
    #[serde(rename = "D")]
    d: Vec<Vec<f64>>,
    u: Option<Vec<f64>>,
    mu: Option<Vec<f64>>,
    epsilon: Option<f64>,
    tol: Option<f64>,
    max_iter: Option<usize>,
}

#[derive(Serialize)]
struct SinkhornOutput {
    plan: Vec<Vec<f64>>,
    f: Vec<f64>,
    g: Vec<f64>,
    value: f64,
    transport_cost: f64,
    marginal_error: f64,
    iterations: usize,
    converged: bool,
    epsilon: f64,
}

fn read_input(path: &Path) -> CliResult<String> {
    if path.as_os_str() == "-" {
        return Ok(std::io::read_to_string(std::io::stdin())?);
    }
    std::fs::read_to_string(path).map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))
}

fn write_json(out: Option<&Path>, value: &impl Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    match out {
        Some(p) => std::fs::write(p, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

fn sinkhorn(input: &Path, out: Option<&Path>) -> CliResult<()> {
    let inst: SinkhornInput =
        serde_json::from_str(&read_input(input)?).map_err(|e| Failure::config(format!("sinkhorn input: {e}")))?;
    let d = CostMatrix::from_rows(&inst.d)?;
    let m = match (inst.u, inst.mu) {
        (None, None) => Marginals::uniform(d.rows(), d.cols()),
        (Some(u), Some(mu)) => Marginals::new(u, mu)?,
        _ => return Err(Failure::config("give both u and mu or neither")),
    };
    let defaults = SinkhornConfig::default();
    let cfg = SinkhornConfig {
        epsilon: inst.epsilon.unwrap_or(defaults.epsilon),
        tol: inst.tol.unwrap_or(defaults.tol),
        max_iter: inst.max_iter.unwrap_or(defaults.max_iter),
    };
    let sol = sinkhorn_log(&d, &m, &cfg)?;
    let report = SinkhornOutput {
        plan: (0..sol.plan.rows()).map(|i| sol.plan.row(i).to_vec()).collect(),
        marginal_error: sol.marginal_error(&m),
        transport_cost: sol.transport_cost(&d),
        f: sol.f,
        g: sol.g,
        value: sol.value,
        iterations: sol.iterations,
        converged: sol.converged,
        epsilon: sol.epsilon,
    };
    write_json(out, &report)?;
    if !report.converged {
        return Err(Error::NotConverged {
            iterations: report.iterations,
        }
        .into());
    }
    Ok(())
}

fn gradcheck(seed: u64, instances: usize) -> CliResult<()> {
    let report = run_gradcheck(seed, instances)?;
    write_json(None, &report)?;
    if !report.passed() {
        let failed: Vec<&str> = report.suites.iter().filter(|s| !s.passed).map(|s| s.name.as_str()).collect();
        return Err(Failure {
            code: EXIT_NUMERICAL,
            kind: "gradcheck",
            message: format!("suites above tolerance: {}", failed.join(", ")),
        });
    }
    Ok(())
}

fn load_config(path: Option<&Path>) -> CliResult<ExperimentConfig> {
    Ok(match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    })
}

/// Loads the config and applies the command-line overrides, validating the
/// result before anything touches the disk.
fn resolve(args: &RunArgs) -> CliResult<ExperimentConfig> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.train.seed = seed;
    }
    if let Some(steps) = args.steps {
        cfg.train.max_step = steps;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn progress(quiet: bool, total: usize) -> impl FnMut(&MetricsRow) {
    move |row| {
        let done = row.step + 1;
        if quiet || (done % 100 != 0 && done != total) {
            return;
        }
        let mut line = format!("step {done}/{total} {:?}", row.branch);
        if let (Some(w2), Some(c)) = (row.w2, row.mode_coverage) {
            line += &format!(" w2 {w2:.4} coverage {c:.3}");
        }
        eprintln!("{line}");
    }
}

fn distill(args: &RunArgs) -> CliResult<()> {
    let cfg = resolve(args)?;
    let summary = run_distill(&cfg, &args.out, progress(args.quiet, cfg.train.total_steps()))?;
    if !args.quiet {
        write_json(None, &summary)?;
    }
    Ok(())
}

fn parse_rows(labels: Option<&[String]>) -> CliResult<Vec<AblationRow>> {
    let Some(labels) = labels else {
        return Ok(AblationRow::ALL.to_vec());
    };
    labels
        .iter()
        .map(|l| {
            AblationRow::ALL
                .into_iter()
                .find(|r| r.label() == l.trim())
                .ok_or_else(|| Failure::config(format!("unknown ablation row {l:?}")))
        })
        .collect()
}

fn ablate(args: &RunArgs, rows: Option<&[String]>) -> CliResult<()> {
    let cfg = resolve(args)?;
    let rows = parse_rows(rows)?;
    for r in &rows {
        ExperimentConfig {
            train: r.apply(&cfg.train),
            ..cfg.clone()
        }
        .validate()?;
    }
    let threads = thread_budget()?;
    let results = run_ablation(&cfg, &args.out, &rows, threads)?;
    let table: Vec<_> = results
        .iter()
        .map(|(row, dir, s)| {
            let (dmd, otd, gan, init) = row.flags();
            json!({
                "row": row.label(),
                "dmd": dmd, "otd": otd, "gan": gan, "acc_init": init,
                "dir": dir.file_name().map(|n| n.to_string_lossy().into_owned()),
                "w2": s.final_eval.w2,
                "mode_coverage": s.final_eval.mode_coverage,
                "score_error": s.final_eval.score_error,
            })
        })
        .collect();
    write_json(Some(&args.out.join("ablation.json")), &table)?;
    if !args.quiet {
        write_json(None, &table)?;
    }
    Ok(())
}

fn eval(checkpoint: &Path, config: Option<&Path>, out: Option<&Path>, seed: Option<u64>, n: usize) -> CliResult<()> {
    let config = match config {
        Some(p) => p.to_path_buf(),
        None => checkpoint
            .ancestors()
            .map(|d| d.join(CONFIG_FILE))
            .find(|p| p.exists())
            .ok_or_else(|| Failure::config("no --config given and no config.json above the checkpoint"))?,
    };
    let mut cfg = ExperimentConfig::load(&config)?;
    if let Some(seed) = seed {
        cfg.train.seed = seed;
    }
    cfg.eval_samples = n;
    cfg.validate()?;
    let tr = Trainer::from_weights(cfg.train.clone(), checkpoint)?;
    let report = json!({
        "checkpoint": checkpoint.display().to_string(),
        "evaluation": tr.evaluate(n)?,
        "zero_forcing": tr.zero_forcing_diagnostic(n)?,
    });
    let Some(out) = out else {
        return write_json(None, &report);
    };
    std::fs::create_dir_all(out)?;
    write_json(Some(&out.join("eval.json")), &report)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.seed);
    let generated = tr.generate(n, &mut rng)?;
    let target = tr.target().sample(n, &mut rng)?;
    let mut csv = format!("{SAMPLES_HEADER}\n");
    for (name, x) in [("generated", &generated), ("target", &target)] {
        for i in 0..x.rows() {
            csv += &format!("{name},{},{}\n", x.at(i, 0), x.at(i, 1));
        }
    }
    std::fs::write(out.join(SAMPLES_FILE), csv)?;
    Ok(())
}

fn metric(row: &MetricsRow, name: &str) -> CliResult<Option<f64>> {
    Ok(match name {
        "loss_dmd" => row.loss_dmd,
        "loss_otd" => row.loss_otd,
        "loss_gan_g" => row.loss_gan_g,
        "loss_denoise" => row.loss_denoise,
        "loss_gan_c" => row.loss_gan_c,
        "w2" => row.w2,
        "mode_coverage" => row.mode_coverage,
        "grad_norm" => row.grad_norm,
        "sinkhorn_iters" => row.sinkhorn_iters.map(|k| k as f64),
        "wall_ms" => row.wall_ms,
        other => return Err(Failure::config(format!("unknown metric column {other:?}"))),
    })
}

/// Legend name of a metrics file: the directory of the run it belongs to.
fn run_name(path: &Path) -> String {
    path.parent()
        .and_then(|p| p.file_name())
        .or_else(|| path.file_stem())
        .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn read_samples(path: &Path) -> CliResult<Vec<Series>> {
    let text = read_input(path)?;
    let mut lines = text.lines();
    if lines.next().map(str::trim_end) != Some(SAMPLES_HEADER) {
        return Err(Error::Csv(format!("{}: expected header {SAMPLES_HEADER:?}", path.display())).into());
    }
    let mut series: Vec<Series> = Vec::new();
    for (k, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = || Failure::from(Error::Csv(format!("{}: bad row {}", path.display(), k + 2)));
        let mut cols = line.split(',');
        let (Some(name), Some(x), Some(y), None) = (cols.next(), cols.next(), cols.next(), cols.next()) else {
            return Err(bad());
        };
        let (x, y) = (x.parse::<f64>().map_err(|_| bad())?, y.parse::<f64>().map_err(|_| bad())?);
        match series.iter_mut().find(|s| s.name == name) {
            Some(s) => s.points.push((x, y)),
            None => series.push(Series::new(name, vec![(x, y)])),
        }
    }
    Ok(series)
}

fn plot(inputs: &[PathBuf], out: &Path, kind: PlotKind, column: &str, title: &str) -> CliResult<()> {
    let svg = match kind {
        PlotKind::Line => {
            let mut series = Vec::with_capacity(inputs.len());
            for p in inputs {
                let rows = parse_metrics_csv(&read_input(p)?)
                    .map_err(|e| Failure::from(Error::Csv(format!("{}: {e}", p.display()))))?;
                let mut points = Vec::with_capacity(rows.len());
                for r in &rows {
                    if let Some(v) = metric(r, column)? {
                        points.push(((r.step + 1) as f64, v));
                    }
                }
                series.push(Series::new(run_name(p), points));
            }
            line_plot_svg(&series, title, &format!("step ({column})"))
        }
        PlotKind::Scatter => {
            let mut series = Vec::new();
            for p in inputs {
                series.extend(read_samples(p)?);
            }
            scatter_svg(&series, title)
        }
    };
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(out, svg)?;
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Sinkhorn { input, out } => sinkhorn(&input, out.as_deref()),
        Command::Gradcheck { seed, instances } => gradcheck(seed, instances),
        Command::Distill(args) => distill(&args),
        Command::Eval {
            checkpoint,
            config,
            out,
            seed,
            samples,
        } => eval(&checkpoint, config.as_deref(), out.as_deref(), seed, samples),
        Command::Ablate { run, rows } => ablate(&run, rows.as_deref()),
        Command::Plot {
            inputs,
            out,
            kind,
            metric,
            title,
        } => plot(&inputs, &out, kind, &metric, &title),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = json!({"error": "config", "message": e.to_string().trim_end()});
            eprintln!("{msg}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", json!({"error": f.kind, "message": f.message, "exit_code": f.code}));
            ExitCode::from(f.code)
        }
    }
}
